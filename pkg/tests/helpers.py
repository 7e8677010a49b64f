"""Shared builders for store/platform/service tests."""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from entobase.backends import pixel_digest, species_order
from entobase.config import AppConfig
from entobase.images import encode_png, preprocess
from entobase.platform import Platform
from entobase.store import Store
from entobase.taxonomy import Taxonomy

from .conftest import noise_image

# Three orders so vote splits can actually dispute; five species total.
PLATFORM_CSV = """\
taxon_id,parent_id,rank,scientific_name,common_name
o1,ROOT,order,Hymenoptera,
f1,o1,family,Apidae,
g1,f1,genus,Apis,
g2,f1,genus,Bombus,
s1,g1,species,Apis mellifera,honey bee
s2,g1,species,Apis cerana,
s3,g2,species,Bombus terrestris,
o2,ROOT,order,Diptera,
f2,o2,family,Syrphidae,
g3,f2,genus,Episyrphus,
s4,g3,species,Episyrphus balteatus,
o3,ROOT,order,Lepidoptera,
f3,o3,family,Pieridae,
g4,f3,genus,Pieris,
s5,g4,species,Pieris rapae,
"""


def one_hot(taxonomy: Taxonomy, species: str) -> list[float]:
    return [1.0 if s == species else 0.0 for s in species_order(taxonomy)]


def uniform(taxonomy: Taxonomy) -> list[float]:
    n = len(taxonomy.species_ids)
    return [1.0 / n] * n


def stub_entry(img: np.ndarray, vector: list[float]) -> tuple[str, list[float]]:
    return pixel_digest(preprocess(img)), vector


def fresh_image(seed: int, size: int = 24) -> tuple[np.ndarray, bytes]:
    img = noise_image(random.Random(seed), size, size)
    return img, encode_png(img)


def platform_taxonomy() -> Taxonomy:
    from entobase.taxonomy import load_taxonomy_csv

    return load_taxonomy_csv(PLATFORM_CSV)


def make_config(tmp_path: Path, stub_table: dict | None = None, **overrides) -> AppConfig:
    csv_path = tmp_path / "taxonomy.csv"
    if not csv_path.exists():
        csv_path.write_text(overrides.pop("taxonomy_text", PLATFORM_CSV), encoding="utf-8")
    else:
        overrides.pop("taxonomy_text", None)
    backend: dict = {"kind": "stub"}
    if stub_table is not None:
        import json

        fixture = tmp_path / "stub.json"
        fixture.write_text(json.dumps(stub_table), encoding="utf-8")
        backend["fixture"] = str(fixture)
    config = AppConfig(
        storage_root=str(tmp_path / "store"),
        taxonomy_csv=str(csv_path),
        backend=backend,
    )
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


def make_platform(tmp_path: Path, stub_table: dict | None = None, **overrides) -> Platform:
    config = make_config(tmp_path, stub_table=stub_table, **overrides)
    store = Store(config.storage_root, snapshot_every=config.snapshot_every)
    return Platform(store, config)


def reopen_platform(platform: Platform) -> Platform:
    """Close and reopen the same store+config (simulates restart)."""
    config = platform.config
    platform.close()
    store = Store(config.storage_root, snapshot_every=config.snapshot_every)
    return Platform(store, config)
