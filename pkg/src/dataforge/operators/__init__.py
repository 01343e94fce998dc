"""Operator runtime: mining scorers, deterministic mock operators and
the subprocess directory-exchange protocol."""

from .mining import MiningConfig, select_top_k
from .runtime import OperatorSpec, run_operator
from .scoring import score_prediction

__all__ = [
    "MiningConfig",
    "OperatorSpec",
    "run_operator",
    "score_prediction",
    "select_top_k",
]
