"""Service configuration: YAML file plus ENTOBASE_* environment overrides.

Every tunable the pipeline exposes (rank thresholds, consensus quorum,
screening radii, grid size, backend wiring) lives here so operators never
patch code. Environment variables override file values key by key; the
recognized names are listed in OVERRIDES and documented in the README.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .classifier import RankThresholds
from .consensus import DEFAULT_MIN_VOTES, DEFAULT_SHARE_THRESHOLD
from .demography import DEFAULT_CELL_SIZE_DEG
from .screening import ScreeningConfig

ENV_PREFIX = "ENTOBASE_"


@dataclass
class AppConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    storage_root: str = "./entobase-store"
    taxonomy_csv: str | None = None
    backend: dict = field(default_factory=lambda: {"kind": "stub"})
    thresholds: RankThresholds = field(default_factory=RankThresholds)
    share_threshold: float = DEFAULT_SHARE_THRESHOLD
    min_votes: int = DEFAULT_MIN_VOTES
    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    blocklist: str | None = None
    cell_size: float = DEFAULT_CELL_SIZE_DEG
    include_machine_labels: bool = False
    defer_classification: bool = False
    snapshot_every: int = 500
    users: list[dict] = field(default_factory=list)
    ui_dist: str | None = None


def _set_listen(cfg: AppConfig, value: str) -> None:
    host, _, port = value.rpartition(":")
    cfg.listen_host = host or "127.0.0.1"
    cfg.listen_port = int(port)


def _set_threshold(rank: str):
    def setter(cfg: AppConfig, value: str) -> None:
        cfg.thresholds = RankThresholds(**{**cfg.thresholds.as_dict(), rank: float(value)})

    return setter


def _set_screening(name: str, cast):
    def setter(cfg: AppConfig, value: str) -> None:
        current = {
            "d_max": cfg.screening.d_max,
            "min_max_prob": cfg.screening.min_max_prob,
            "entropy_factor": cfg.screening.entropy_factor,
        }
        current[name] = cast(value)
        cfg.screening = ScreeningConfig(**current)

    return setter


def _set_backend(name: str):
    def setter(cfg: AppConfig, value: str) -> None:
        cfg.backend = {**cfg.backend, name: value}

    return setter


_TRUTHY = {"1", "true", "yes", "on"}

OVERRIDES = {
    "LISTEN": _set_listen,
    "STORAGE_ROOT": lambda c, v: setattr(c, "storage_root", v),
    "TAXONOMY": lambda c, v: setattr(c, "taxonomy_csv", v),
    "BACKEND_KIND": _set_backend("kind"),
    "BACKEND_FIXTURE": _set_backend("fixture"),
    "BACKEND_MODEL_PATH": _set_backend("model_path"),
    "BACKEND_URL": _set_backend("url"),
    "BACKEND_PARALLELISM": _set_backend("parallelism"),
    "TAU_SPECIES": _set_threshold("species"),
    "TAU_GENUS": _set_threshold("genus"),
    "TAU_FAMILY": _set_threshold("family"),
    "TAU_ORDER": _set_threshold("order"),
    "SHARE_THRESHOLD": lambda c, v: setattr(c, "share_threshold", float(v)),
    "MIN_VOTES": lambda c, v: setattr(c, "min_votes", int(v)),
    "D_MAX": _set_screening("d_max", int),
    "MIN_MAX_PROB": _set_screening("min_max_prob", float),
    "ENTROPY_FACTOR": _set_screening("entropy_factor", float),
    "BLOCKLIST": lambda c, v: setattr(c, "blocklist", v),
    "CELL_SIZE": lambda c, v: setattr(c, "cell_size", float(v)),
    "INCLUDE_MACHINE_LABELS": lambda c, v: setattr(c, "include_machine_labels", v.lower() in _TRUTHY),
    "DEFER_CLASSIFICATION": lambda c, v: setattr(c, "defer_classification", v.lower() in _TRUTHY),
    "SNAPSHOT_EVERY": lambda c, v: setattr(c, "snapshot_every", int(v)),
    "UI_DIST": lambda c, v: setattr(c, "ui_dist", v),
}


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    """Load config from YAML (optional) and apply environment overrides."""
    cfg = AppConfig()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"config {path} must be a mapping")
        if "listen" in raw:
            _set_listen(cfg, str(raw["listen"]))
        cfg.storage_root = str(raw.get("storage_root", cfg.storage_root))
        if raw.get("taxonomy"):
            cfg.taxonomy_csv = str(raw["taxonomy"])
        if isinstance(raw.get("backend"), dict):
            cfg.backend = dict(raw["backend"])
        thresholds = raw.get("thresholds") or {}
        if thresholds:
            cfg.thresholds = RankThresholds(**{**cfg.thresholds.as_dict(), **thresholds})
        cons = raw.get("consensus") or {}
        cfg.share_threshold = float(cons.get("share_threshold", cfg.share_threshold))
        cfg.min_votes = int(cons.get("min_votes", cfg.min_votes))
        scr = raw.get("screening") or {}
        cfg.screening = ScreeningConfig(
            d_max=int(scr.get("d_max", cfg.screening.d_max)),
            min_max_prob=float(scr.get("min_max_prob", cfg.screening.min_max_prob)),
            entropy_factor=float(scr.get("entropy_factor", cfg.screening.entropy_factor)),
        )
        if scr.get("blocklist"):
            cfg.blocklist = str(scr["blocklist"])
        demo = raw.get("demography") or {}
        cfg.cell_size = float(demo.get("cell_size", cfg.cell_size))
        cfg.include_machine_labels = bool(
            demo.get("include_machine_labels", cfg.include_machine_labels)
        )
        cfg.defer_classification = bool(raw.get("defer_classification", cfg.defer_classification))
        cfg.snapshot_every = int(raw.get("snapshot_every", cfg.snapshot_every))
        if isinstance(raw.get("users"), list):
            cfg.users = [dict(u) for u in raw["users"]]
        if raw.get("ui_dist"):
            cfg.ui_dist = str(raw["ui_dist"])

    env = os.environ if env is None else env
    for key, apply_override in OVERRIDES.items():
        value = env.get(ENV_PREFIX + key)
        if value is not None:
            apply_override(cfg, value)
    return cfg
