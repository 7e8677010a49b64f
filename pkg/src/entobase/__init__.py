"""entobase: crowdsourced insect-observation platform."""

__version__ = "0.1.0"

from .classifier import (
    ClassificationResult,
    RankThresholds,
    classify_hierarchical,
    classify_image,
    evaluate_topk,
    rollup,
)
from .consensus import (
    ConsensusResult,
    ConsensusStatus,
    IdentificationVote,
    consensus,
    user_reliability,
)
from .demography import GridCell, aggregate, grid_cell, novelty_scan
from .images import decode_image, preprocess
from .screening import HashIndex, ScreeningVerdict, dhash64, hamming, screen
from .taxonomy import Rank, Taxonomy, TaxonNode, load_taxonomy, load_taxonomy_csv

__all__ = [
    "ClassificationResult",
    "ConsensusResult",
    "ConsensusStatus",
    "GridCell",
    "HashIndex",
    "IdentificationVote",
    "Rank",
    "RankThresholds",
    "ScreeningVerdict",
    "TaxonNode",
    "Taxonomy",
    "aggregate",
    "classify_hierarchical",
    "classify_image",
    "consensus",
    "decode_image",
    "dhash64",
    "evaluate_topk",
    "grid_cell",
    "hamming",
    "load_taxonomy",
    "load_taxonomy_csv",
    "novelty_scan",
    "preprocess",
    "rollup",
    "screen",
    "user_reliability",
]
