"""Deepest-sufficiently-confident classification over the taxonomy.

A species-level probability vector is rolled up the tree (a node's confidence
is the total probability mass of its leaf species), then a greedy descent from
the root stops before entering any child whose confidence falls below that
rank's threshold. The root itself is the "unidentified insect" fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import EmptyDataset, InvalidProbabilityVector, KeyMismatch
from .images import preprocess
from .taxonomy import ROOT_ID, Rank, Taxonomy

PROB_SUM_TOL = 1e-6

ProbabilityVector = dict[str, float]
NodeConfidenceMap = dict[str, float]


class ModelBackend(Protocol):
    """Anything that maps a preprocessed 224x224x3 uint8 image to species probabilities."""

    deterministic: bool

    def predict(self, pixels: np.ndarray) -> ProbabilityVector: ...


@dataclass(frozen=True)
class RankThresholds:
    """Per-rank confidence thresholds, each in (0, 1]."""

    species: float = 0.70
    genus: float = 0.70
    family: float = 0.70
    order: float = 0.70

    def __post_init__(self):
        for name in ("species", "genus", "family", "order"):
            value = getattr(self, name)
            if not (0.0 < value <= 1.0):
                raise ValueError(f"threshold {name}={value} outside (0, 1]")

    def for_rank(self, rank: Rank) -> float:
        return {
            Rank.SPECIES: self.species,
            Rank.GENUS: self.genus,
            Rank.FAMILY: self.family,
            Rank.ORDER: self.order,
        }[rank]

    def as_dict(self) -> dict[str, float]:
        return {
            "species": self.species,
            "genus": self.genus,
            "family": self.family,
            "order": self.order,
        }


@dataclass(frozen=True)
class ClassificationResult:
    chosen: str
    chosen_rank: Rank
    confidence: float
    path: tuple[tuple[str, float], ...]
    thresholds_used: RankThresholds = field(default_factory=RankThresholds)

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "chosen_rank": self.chosen_rank.label,
            "confidence": self.confidence,
            "path": [[taxon_id, conf] for taxon_id, conf in self.path],
            "thresholds_used": self.thresholds_used.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationResult":
        return cls(
            chosen=d["chosen"],
            chosen_rank=Rank.from_name(d["chosen_rank"]),
            confidence=d["confidence"],
            path=tuple((t, c) for t, c in d["path"]),
            thresholds_used=RankThresholds(**d["thresholds_used"]),
        )


def validate_probability_vector(p: ProbabilityVector, taxonomy: Taxonomy) -> None:
    """Enforce the vector contract: keys == species set, simplex within tolerance."""
    keys = set(p)
    species = set(taxonomy.species_ids)
    if keys != species:
        missing = sorted(species - keys)[:3]
        extra = sorted(keys - species)[:3]
        raise KeyMismatch(f"species set mismatch (missing {missing}, extra {extra})")
    total = 0.0
    for taxon_id in sorted(p):
        value = p[taxon_id]
        if value < 0.0 or math.isnan(value):
            raise InvalidProbabilityVector(f"p[{taxon_id!r}] = {value}")
        total += value
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise InvalidProbabilityVector(f"probabilities sum to {total!r}")


def rollup(p: ProbabilityVector, taxonomy: Taxonomy) -> NodeConfidenceMap:
    """Confidence for every node: the probability mass of its species leaves.

    Computed bottom-up so each internal node is exactly the float sum of its
    children, in sorted-child order.
    """
    validate_probability_vector(p, taxonomy)
    conf: NodeConfidenceMap = {}
    order = list(taxonomy.descend_order())
    for taxon_id in reversed(order):
        kids = taxonomy.children.get(taxon_id, ())
        if not kids:
            conf[taxon_id] = float(p[taxon_id])
        else:
            conf[taxon_id] = sum(conf[k] for k in kids)
    return conf


def classify_hierarchical(
    conf: NodeConfidenceMap, taxonomy: Taxonomy, thresholds: RankThresholds | None = None
) -> ClassificationResult:
    """Greedy max-child descent, stopping before any child below its rank threshold.

    Ties on confidence go to the smaller taxon_id. Returns the root (confidence
    as rolled up, nominally 1) when no order passes the order threshold.
    """
    thresholds = thresholds or RankThresholds()
    current = ROOT_ID
    path: list[tuple[str, float]] = [(ROOT_ID, conf[ROOT_ID])]
    while True:
        kids = taxonomy.children.get(current, ())
        if not kids:
            break
        best = min(kids, key=lambda k: (-conf[k], k))
        child_rank = taxonomy.nodes[best].rank
        if conf[best] < thresholds.for_rank(child_rank):
            break
        current = best
        path.append((best, conf[best]))
    return ClassificationResult(
        chosen=current,
        chosen_rank=taxonomy.nodes[current].rank,
        confidence=conf[current],
        path=tuple(path),
        thresholds_used=thresholds,
    )


def classify_image(
    img: np.ndarray,
    backend: ModelBackend,
    taxonomy: Taxonomy,
    thresholds: RankThresholds | None = None,
) -> tuple[ProbabilityVector, ClassificationResult]:
    """preprocess -> backend -> rollup -> classify; returns the raw vector too.

    The raw vector is persisted by callers so threshold changes can re-classify
    without re-scoring.
    """
    pixels = preprocess(img)
    probs = backend.predict(pixels)
    conf = rollup(probs, taxonomy)
    return probs, classify_hierarchical(conf, taxonomy, thresholds)


def top_k_species(p: ProbabilityVector, k: int) -> list[str]:
    """The k highest-probability species, ties broken by smaller taxon_id."""
    ranked = sorted(p, key=lambda taxon_id: (-p[taxon_id], taxon_id))
    return ranked[:k]


def evaluate_topk(
    backend: ModelBackend, items: Iterable[tuple[np.ndarray, str]], k: int
) -> float:
    """Fraction of labeled images whose true species is among the top-k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = 0
    total = 0
    for img, truth in items:
        probs = backend.predict(preprocess(img))
        if truth in top_k_species(probs, k):
            hits += 1
        total += 1
    if total == 0:
        raise EmptyDataset("no labeled items to evaluate")
    return hits / total


def evaluate_hierarchical(
    backend: ModelBackend,
    items: Sequence[tuple[np.ndarray, str]],
    taxonomy: Taxonomy,
    thresholds: RankThresholds | None = None,
) -> float:
    """Fraction of items whose chosen node is an ancestor-or-self of the true species."""
    if not items:
        raise EmptyDataset("no labeled items to evaluate")
    hits = 0
    for img, truth in items:
        _, result = classify_image(img, backend, taxonomy, thresholds)
        if taxonomy.is_ancestor_or_self(result.chosen, truth):
            hits += 1
    return hits / len(items)
