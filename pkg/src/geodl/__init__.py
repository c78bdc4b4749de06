"""Geometric ball embeddings for EL ontologies, with a variance-aware
variant for many-to-many roles, triple baselines and subsumption ranking."""

from .model import EmbeddingState, Variant
from .normalize import NormalizedOntology, normalize, verify_normal
from .parser import parse_concept, parse_ontology
from .training import SplitSpec, TrainConfig, split, train

__version__ = "0.1.0"

__all__ = [
    "EmbeddingState",
    "Variant",
    "NormalizedOntology",
    "normalize",
    "verify_normal",
    "parse_concept",
    "parse_ontology",
    "SplitSpec",
    "TrainConfig",
    "split",
    "train",
    "__version__",
]
