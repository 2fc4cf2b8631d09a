"""Feed-forward transition-based dependency parsing with feature ablation."""

from ffdp.conllu import (
    DUMMY,
    DependencyTree,
    Sentence,
    Token,
    is_projective,
    parse_conllu,
    read_conllu,
    write_conllu,
)
from ffdp.estimator import FeedForwardParser
from ffdp.features import FeatureTemplate, Vocabulary, input_dim
from ffdp.network import SizeConfig, reduced_sizes
from ffdp.transitions import TransitionSystem

__all__ = [
    "DUMMY",
    "DependencyTree",
    "FeatureTemplate",
    "FeedForwardParser",
    "Sentence",
    "SizeConfig",
    "Token",
    "TransitionSystem",
    "Vocabulary",
    "input_dim",
    "is_projective",
    "parse_conllu",
    "read_conllu",
    "reduced_sizes",
    "write_conllu",
]

__version__ = "0.1.0"
