"""False-observation defenses: near-duplicate hashing and a no-insect gate.

Re-uploads (including pictures lifted from the web) are caught by a 64-bit
difference hash over the luma channel compared against an index of accepted
observations plus a curated blocklist. Photos with no insect at all are caught
by the classifier's own uncertainty: a vector that is both flat (high entropy)
and weak (low max probability) is flagged rather than accepted.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .classifier import ProbabilityVector
from .images import bilinear_resize, luma

HASH_BITS = 64
DEFAULT_MAX_HAMMING = 8
DEFAULT_MIN_MAX_PROB = 0.05
DEFAULT_ENTROPY_FACTOR = 0.9


def dhash64(img: np.ndarray) -> int:
    """64-bit dHash: luma, bilinear 9x8 resize, horizontal gradient signs.

    Bit i*8+j is set iff pixel(row i, col j) > pixel(row i, col j+1). Uniform
    brightness shifts cancel because only neighbor differences matter.
    """
    gray = luma(img)
    small = bilinear_resize(gray, 8, 9)
    value = 0
    for i in range(8):
        for j in range(8):
            if small[i, j] > small[i, j + 1]:
                value |= 1 << (i * 8 + j)
    return value


def hash_to_hex(value: int) -> str:
    return f"{value:016x}"


def hex_to_hash(text: str) -> int:
    value = int(text, 16)
    if not (0 <= value < 1 << HASH_BITS):
        raise ValueError(f"hash {text!r} does not fit in 64 bits")
    return value


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def parse_blocklist(text: str) -> list[int]:
    """One 16-hex-char hash per line; blank lines and # comments allowed."""
    hashes = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            hashes.append(hex_to_hash(line))
    return hashes


class HashIndex:
    """Ordered (hash, observation_id) pairs with nearest-match lookup.

    Lookups scan linearly; at desk scale (thousands of 64-bit hashes) that is
    both fast and trivially equal to its own oracle. Inserts are serialized,
    and screen() holds the lock across check-then-insert so no duplicate pair
    can both be accepted.
    """

    def __init__(self):
        self._entries: list[tuple[int, str]] = []
        self.lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[tuple[int, str]]:
        with self.lock:
            return list(self._entries)

    def add(self, value: int, observation_id: str) -> None:
        with self.lock:
            self._entries.append((value, observation_id))

    def add_blocklist(self, hashes: Iterable[int], label: str = "blocklist") -> None:
        """Blocklist entries are indexed up front so they win earliest-tie breaks."""
        with self.lock:
            for h in hashes:
                self._entries.append((h, f"{label}:{hash_to_hex(h)}"))

    def remove(self, value: int, observation_id: str) -> None:
        """Drop an entry (an observation flagged after deferred classification)."""
        with self.lock:
            self._entries = [
                (h, o) for h, o in self._entries if not (h == value and o == observation_id)
            ]

    def nearest(self, value: int, d_max: int = DEFAULT_MAX_HAMMING) -> tuple[str, int] | None:
        """Closest entry within d_max; distance ties go to the earliest entry."""
        with self.lock:
            best: tuple[str, int] | None = None
            for stored, observation_id in self._entries:
                d = hamming(value, stored)
                if d <= d_max and (best is None or d < best[1]):
                    best = (observation_id, d)
                    if d == 0:
                        break
            return best


def entropy(p: ProbabilityVector) -> float:
    """Shannon entropy in nats; zero-probability entries contribute nothing."""
    total = 0.0
    for taxon_id in sorted(p):
        value = p[taxon_id]
        if value > 0.0:
            total -= value * math.log(value)
    return total


class ScreeningStatus(str, enum.Enum):
    ACCEPTED = "ACCEPTED"
    FLAGGED_DUPLICATE = "FLAGGED_DUPLICATE"
    FLAGGED_NO_INSECT = "FLAGGED_NO_INSECT"


@dataclass(frozen=True)
class ScreeningVerdict:
    status: ScreeningStatus
    matched_observation_id: str | None
    max_species_prob: float
    entropy: float

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "matched_observation_id": self.matched_observation_id,
            "max_species_prob": self.max_species_prob,
            "entropy": self.entropy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScreeningVerdict":
        return cls(
            status=ScreeningStatus(d["status"]),
            matched_observation_id=d.get("matched_observation_id"),
            max_species_prob=float(d["max_species_prob"]),
            entropy=float(d["entropy"]),
        )


@dataclass(frozen=True)
class ScreeningConfig:
    d_max: int = DEFAULT_MAX_HAMMING
    min_max_prob: float = DEFAULT_MIN_MAX_PROB
    entropy_factor: float = DEFAULT_ENTROPY_FACTOR

    def max_entropy(self, n_species: int) -> float:
        return self.entropy_factor * math.log(n_species)


def insect_presence_gate(
    p: ProbabilityVector,
    min_max_prob: float = DEFAULT_MIN_MAX_PROB,
    max_entropy: float | None = None,
) -> tuple[bool, float, float]:
    """(accepted, max_prob, entropy); flag only when BOTH signals say no insect.

    max_entropy defaults to 0.9 * ln(N) for an N-species vector.
    """
    max_prob = max(p.values())
    h = entropy(p)
    if max_entropy is None:
        max_entropy = DEFAULT_ENTROPY_FACTOR * math.log(len(p))
    flagged = max_prob < min_max_prob and h > max_entropy
    return not flagged, max_prob, h


def screen(
    img: np.ndarray,
    probs: ProbabilityVector | Callable[[], ProbabilityVector],
    index: HashIndex,
    config: ScreeningConfig = ScreeningConfig(),
    observation_id: str = "",
    image_hash: int | None = None,
) -> ScreeningVerdict:
    """Duplicate check first, then the presence gate; accepted hashes get indexed.

    ``probs`` may be a zero-arg callable so the backend only runs when the
    duplicate check passes. Flagged items never become dedup anchors.
    """
    value = dhash64(img) if image_hash is None else image_hash
    with index.lock:
        match = index.nearest(value, config.d_max)
        if match is not None:
            return ScreeningVerdict(
                status=ScreeningStatus.FLAGGED_DUPLICATE,
                matched_observation_id=match[0],
                max_species_prob=0.0,
                entropy=0.0,
            )
        vector = probs() if callable(probs) else probs
        accepted, max_prob, h = insect_presence_gate(
            vector,
            min_max_prob=config.min_max_prob,
            max_entropy=config.max_entropy(len(vector)),
        )
        if not accepted:
            return ScreeningVerdict(
                status=ScreeningStatus.FLAGGED_NO_INSECT,
                matched_observation_id=None,
                max_species_prob=max_prob,
                entropy=h,
            )
        index.add(value, observation_id)
        return ScreeningVerdict(
            status=ScreeningStatus.ACCEPTED,
            matched_observation_id=None,
            max_species_prob=max_prob,
            entropy=h,
        )
