#!/usr/bin/env python3
"""Regenerate tests/fixtures/taxonomy_403.csv.

Deterministic synthetic tree: 6 orders of flower-visiting insects, 40
families, ~130 genera, exactly 403 species. Ids are zero-padded so
lexicographic order equals numeric order.
"""

from __future__ import annotations

import csv
import random
import sys
from pathlib import Path

TARGET_SPECIES = 403

ORDERS = [
    ("o01", "Hymenoptera"),
    ("o02", "Diptera"),
    ("o03", "Lepidoptera"),
    ("o04", "Coleoptera"),
    ("o05", "Hemiptera"),
    ("o06", "Orthoptera"),
]


def build_rows() -> list[dict[str, str]]:
    rng = random.Random(403)
    rows = []
    for taxon_id, name in ORDERS:
        rows.append(
            {
                "taxon_id": taxon_id,
                "parent_id": "ROOT",
                "rank": "order",
                "scientific_name": name,
                "common_name": "",
            }
        )

    families = []
    f_n = 0
    for order_id, _ in ORDERS:
        for _ in range(rng.randint(5, 8)):
            f_n += 1
            fid = f"f{f_n:03d}"
            families.append(fid)
            rows.append(
                {
                    "taxon_id": fid,
                    "parent_id": order_id,
                    "rank": "family",
                    "scientific_name": f"Familia{f_n:03d}",
                    "common_name": "",
                }
            )

    genera = []
    g_n = 0
    for fid in families:
        for _ in range(rng.randint(2, 5)):
            g_n += 1
            gid = f"g{g_n:04d}"
            genera.append(gid)
            rows.append(
                {
                    "taxon_id": gid,
                    "parent_id": fid,
                    "rank": "genus",
                    "scientific_name": f"Genus{g_n:04d}",
                    "common_name": "",
                }
            )

    # Hand out species counts, then trim/pad to hit the target exactly.
    counts = [rng.randint(1, 6) for _ in genera]
    while sum(counts) > TARGET_SPECIES:
        i = rng.randrange(len(counts))
        if counts[i] > 1:
            counts[i] -= 1
    while sum(counts) < TARGET_SPECIES:
        counts[rng.randrange(len(counts))] += 1

    s_n = 0
    for gid, count in zip(genera, counts):
        for _ in range(count):
            s_n += 1
            rows.append(
                {
                    "taxon_id": f"s{s_n:05d}",
                    "parent_id": gid,
                    "rank": "species",
                    "scientific_name": f"Species{s_n:05d}",
                    "common_name": f"bug {s_n}" if s_n % 7 == 0 else "",
                }
            )
    assert s_n == TARGET_SPECIES, s_n
    return rows


def main() -> int:
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "taxonomy_403.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["taxon_id", "parent_id", "rank", "scientific_name", "common_name"],
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(build_rows())
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
