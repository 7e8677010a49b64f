#!/usr/bin/env python3
"""Record frontend test fixtures from a live service.

Boots the real HTTP service against a scratch store, plays a scenario
(consensus, disputes, an expert resolution, a duplicate, a spread of
demography cells/months), and saves the raw API payloads plus the CLI
demography export under frontend/tests/fixtures/.
"""

from __future__ import annotations

import json
import signal
import socket
import subprocess
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import httpx
import numpy as np
import yaml

REPO = Path(__file__).resolve().parent.parent
FIXTURE_DIR = REPO / "frontend" / "tests" / "fixtures"

TAXONOMY_CSV = """\
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

USERS = [
    {"user_id": "alice", "token": "tok-alice"},
    {"user_id": "bob", "token": "tok-bob"},
    {"user_id": "carol", "token": "tok-carol"},
    {"user_id": "expert", "token": "tok-expert", "expert": True},
]

TS_MAY = int(datetime(2021, 5, 10, tzinfo=timezone.utc).timestamp())
TS_JUN = int(datetime(2021, 6, 12, tzinfo=timezone.utc).timestamp())
TS_JUL = int(datetime(2021, 7, 14, tzinfo=timezone.utc).timestamp())

# (seed, species, lat, lon, captured_at)
SUBMISSIONS = [
    (1, "s1", 48.85, 2.35, TS_JUN),   # quorum drill: capture its vote responses
    (2, "s1", 48.85, 2.35, TS_JUN),   # disputed
    (3, "s2", 48.85, 2.35, TS_JUN),   # disputed
    (4, "s3", 48.85, 2.35, TS_JUN),   # consensus then expert-resolved
    (11, "s1", 48.2, 2.2, TS_MAY),
    (12, "s1", 48.2, 2.2, TS_JUN),
    (13, "s2", 48.2, 2.2, TS_JUN),
    (14, "s1", 49.4, 2.9, TS_JUL),
    (15, "s2", 49.4, 2.9, TS_JUL),
    (16, "s2", 48.85, 2.35, TS_JUL),
]


def make_image(seed: int) -> bytes:
    from entobase.images import encode_png

    rng = np.random.default_rng(seed)
    return encode_png(rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8))


def build_stub_table() -> dict:
    from entobase.backends import pixel_digest, species_order
    from entobase.images import decode_image, preprocess
    from entobase.taxonomy import load_taxonomy_csv

    taxonomy = load_taxonomy_csv(TAXONOMY_CSV)
    order = species_order(taxonomy)
    table = {}
    for seed, species, *_ in SUBMISSIONS:
        digest = pixel_digest(preprocess(decode_image(make_image(seed))))
        table[digest] = [1.0 if s == species else 0.0 for s in order]
    table["default"] = [1.0 / len(order)] * len(order)
    return table


def main() -> int:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    work = Path(tempfile.mkdtemp(prefix="entobase-fixtures-"))
    (work / "taxonomy.csv").write_text(TAXONOMY_CSV, encoding="utf-8")
    (work / "stub.json").write_text(json.dumps(build_stub_table()), encoding="utf-8")

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    base = f"http://127.0.0.1:{port}"

    config = {
        "listen": f"127.0.0.1:{port}",
        "storage_root": str(work / "store"),
        "taxonomy": str(work / "taxonomy.csv"),
        "backend": {"kind": "stub", "fixture": str(work / "stub.json")},
        "users": USERS,
    }
    config_path = work / "config.yaml"
    config_path.write_text(yaml.safe_dump(config), encoding="utf-8")

    proc = subprocess.Popen(
        [sys.executable, "-m", "entobase.cli", "--config", str(config_path), "serve"],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.STDOUT,
    )
    try:
        for _ in range(100):
            try:
                if httpx.get(base + "/healthz", timeout=1.0).status_code == 200:
                    break
            except httpx.HTTPError:
                time.sleep(0.1)
        else:
            raise RuntimeError("service did not start")

        def auth(token):
            return {"Authorization": f"Bearer {token}"}

        def submit(seed, lat, lon, captured_at, token="tok-alice"):
            resp = httpx.post(
                base + "/api/v1/observations",
                files={"image": (f"img{seed}.png", make_image(seed), "image/png")},
                data={"metadata": json.dumps(
                    {"latitude": lat, "longitude": lon, "captured_at": captured_at}
                )},
                headers=auth(token),
                timeout=30.0,
            )
            resp.raise_for_status()
            return resp.json()

        def vote(obs_id, taxon, token):
            resp = httpx.post(
                base + f"/api/v1/observations/{obs_id}/votes",
                json={"taxon_id": taxon},
                headers=auth(token),
                timeout=10.0,
            )
            resp.raise_for_status()
            return resp.json()

        def save(name, payload):
            (FIXTURE_DIR / name).write_text(
                json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            print(f"wrote {name}")

        records = {}
        for seed, species, lat, lon, captured in SUBMISSIONS:
            records[seed] = submit(seed, lat, lon, captured)

        drill = records[1]["observation_id"]
        save("submit_accepted.json", records[1])
        save("submit_duplicate.json", submit(1, 48.85, 2.35, TS_JUN, token="tok-bob"))

        vote(drill, "s1", "tok-alice")
        before = vote(drill, "s1", "tok-bob")
        save("vote_before_quorum.json", before)
        crossing = vote(drill, "s1", "tok-carol")
        save("vote_crossing_quorum.json", crossing)
        save(
            "observation_consensus.json",
            httpx.get(base + f"/api/v1/observations/{drill}", timeout=10.0).json(),
        )

        # two disputes: votes land in three different orders
        for seed in (2, 3):
            obs = records[seed]["observation_id"]
            vote(obs, "s1" if seed == 2 else "s2", "tok-alice")
            vote(obs, "s4", "tok-bob")
            vote(obs, "s5", "tok-carol")

        # expert-resolved observation
        resolved = records[4]["observation_id"]
        for token in ("tok-alice", "tok-bob", "tok-carol"):
            vote(resolved, "s3", token)
        httpx.post(
            base + f"/api/v1/observations/{resolved}/resolve",
            json={"taxon_id": "s3"},
            headers=auth("tok-expert"),
            timeout=10.0,
        ).raise_for_status()

        # demography spread: agree on every remaining submission
        for seed, species, *_ in SUBMISSIONS[4:]:
            obs = records[seed]["observation_id"]
            for token in ("tok-alice", "tok-bob", "tok-carol"):
                vote(obs, species, token)

        save("taxonomy.json", httpx.get(base + "/api/v1/taxonomy", timeout=10.0).json())
        save("disputed.json", httpx.get(base + "/api/v1/disputed", timeout=10.0).json())
        save(
            "observations_page.json",
            httpx.get(base + "/api/v1/observations", params={"limit": 50}, timeout=10.0).json(),
        )
        save(
            "demography_g1.json",
            httpx.get(
                base + "/api/v1/demography",
                params={"taxon": "g1", "cell_size": 0.5},
                timeout=10.0,
            ).json(),
        )
        save("novelty.json", httpx.get(base + "/api/v1/novelty", timeout=10.0).json())
        save("me_expert.json", httpx.get(base + "/api/v1/me", headers=auth("tok-expert"), timeout=10.0).json())
        save("me_regular.json", httpx.get(base + "/api/v1/me", headers=auth("tok-alice"), timeout=10.0).json())

        # the CLI export for the same query, recorded byte-for-byte
        export = subprocess.run(
            [sys.executable, "-m", "entobase.cli", "--config", str(config_path),
             "export-demography", "--taxon", "g1", "--cell-size", "0.5"],
            capture_output=True,
            text=True,
            check=True,
        )
        (FIXTURE_DIR / "demography_export.csv").write_text(export.stdout, encoding="utf-8")
        print("wrote demography_export.csv")
    finally:
        proc.send_signal(signal.SIGTERM)
        try:
            proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
    return 0


if __name__ == "__main__":
    sys.exit(main())
