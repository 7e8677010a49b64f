from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from entobase.taxonomy import Taxonomy, load_taxonomy, load_taxonomy_csv


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(report, "when", "call") == "call":
                outcomes[nodeid] = status
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(outcomes):
        name = "::".join(nodeid.split("::")[-2:])
        verdict = "PASS" if outcomes[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}: {name}")

FIXTURES = Path(__file__).parent / "fixtures"

TINY_CSV = """\
taxon_id,parent_id,rank,scientific_name,common_name
o1,ROOT,order,Hymenoptera,
f1,o1,family,Apidae,
g1,f1,genus,Apis,
g2,f1,genus,Bombus,
s1,g1,species,Apis mellifera,honey bee
s2,g1,species,Apis cerana,
s3,g2,species,Bombus terrestris,bumblebee
"""


@pytest.fixture(scope="session")
def taxonomy403() -> Taxonomy:
    return load_taxonomy_csv((FIXTURES / "taxonomy_403.csv").read_text(encoding="utf-8"))


@pytest.fixture()
def tiny_taxonomy() -> Taxonomy:
    return load_taxonomy_csv(TINY_CSV)


def make_rows(spec: dict[str, list[str]]) -> list[dict[str, str]]:
    """Build taxonomy rows from {order: [family:genus:species-count, ...]} shorthand.

    Example: {"o1": ["f1:g1:2", "f1:g2:1"]} gives two genera under one family.
    """
    rows = []
    seen = set()

    def add(taxon_id, parent_id, rank):
        if taxon_id in seen:
            return
        seen.add(taxon_id)
        rows.append(
            {
                "taxon_id": taxon_id,
                "parent_id": parent_id,
                "rank": rank,
                "scientific_name": taxon_id.upper(),
                "common_name": "",
            }
        )

    species_n = 0
    for order, entries in spec.items():
        add(order, "ROOT", "order")
        for entry in entries:
            family, genus, count = entry.split(":")
            add(family, order, "family")
            add(genus, family, "genus")
            for _ in range(int(count)):
                species_n += 1
                add(f"{genus}x{species_n:03d}", genus, "species")
    return rows


def random_taxonomy(rng: random.Random, max_species: int = 30, max_nodes: int | None = None) -> Taxonomy:
    """Random valid taxonomy with at least one species."""
    rows = []
    species_budget = rng.randint(1, max_species)
    node_budget = max_nodes if max_nodes is not None else 10_000
    n_order = n_family = n_genus = n_species = 0
    nodes_used = 0

    def room(extra: int) -> bool:
        return nodes_used + extra <= node_budget - 1  # -1 for root

    while n_species < species_budget:
        if not room(4):
            break
        n_order += 1
        order_id = f"o{n_order:02d}"
        rows.append(dict(taxon_id=order_id, parent_id="ROOT", rank="order",
                         scientific_name=order_id, common_name=""))
        nodes_used += 1
        for _ in range(rng.randint(1, 2)):
            if n_species >= species_budget or not room(3):
                break
            n_family += 1
            family_id = f"f{n_family:02d}"
            rows.append(dict(taxon_id=family_id, parent_id=order_id, rank="family",
                             scientific_name=family_id, common_name=""))
            nodes_used += 1
            for _ in range(rng.randint(1, 3)):
                if n_species >= species_budget or not room(2):
                    break
                n_genus += 1
                genus_id = f"g{n_genus:03d}"
                rows.append(dict(taxon_id=genus_id, parent_id=family_id, rank="genus",
                                 scientific_name=genus_id, common_name=""))
                nodes_used += 1
                for _ in range(rng.randint(1, 4)):
                    if n_species >= species_budget or not room(1):
                        break
                    n_species += 1
                    rows.append(dict(taxon_id=f"s{n_species:04d}", parent_id=genus_id,
                                     rank="species", scientific_name=f"s{n_species:04d}",
                                     common_name=""))
                    nodes_used += 1
        # Guarantee progress: a bare order would violate LeafNotSpecies.
        if rows and rows[-1]["rank"] == "order":
            rows.pop()
            n_order -= 1
            nodes_used -= 1
            break
    if n_species == 0:
        return load_taxonomy(make_rows({"o1": ["f1:g1:1"]}))
    return load_taxonomy(rows)


def random_simplex(rng: random.Random, keys: list[str]) -> dict[str, float]:
    """Random point on the probability simplex over the given keys."""
    raw = [rng.random() for _ in keys]
    # Occasionally zero some entries so ties and empty subtrees show up.
    if len(keys) > 2 and rng.random() < 0.3:
        for i in range(len(raw)):
            if rng.random() < 0.3:
                raw[i] = 0.0
    total = sum(raw)
    if total == 0:
        raw[0] = 1.0
        total = 1.0
    return {k: v / total for k, v in zip(keys, raw)}


def solid_image(h: int, w: int, rgb=(80, 120, 200)) -> np.ndarray:
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:, :] = rgb
    return img


def gradient_image(h: int = 120, w: int = 160, lo: int = 10, hi: int = 240) -> np.ndarray:
    """Horizontal ramp with clear neighbor differences, headroom for +brightness."""
    ramp = np.linspace(lo, hi, w).astype(np.uint8)
    img = np.repeat(ramp[None, :, None], h, axis=0)
    return np.repeat(img, 3, axis=2)


def noise_image(rng: random.Random, h: int = 32, w: int = 32) -> np.ndarray:
    np_rng = np.random.default_rng(rng.getrandbits(32))
    return np_rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
