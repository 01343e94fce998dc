"""Active-learning mining: score a candidate pool, keep the top k.

Selection is separated from scoring so it is invariant under any
strictly increasing rescoring (only the ranking matters) and so the
full-sort oracle tests have a single seam to check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

from ..errors import EmptyPool
from .mocks import mock_infer
from .scoring import AGGREGATORS, SCORERS, score_prediction

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiningConfig:
    scorer: str = "least_confidence"
    aggregator: str = "max"
    top_k: int = 1

    def __post_init__(self):
        if self.scorer not in SCORERS:
            raise ValueError(f"unknown scorer: {self.scorer!r}")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator: {self.aggregator!r}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


def select_top_k(scores: Mapping[str, float], top_k: int) -> list[str]:
    """Keys of the *top_k* highest scores, ties broken by ascending key.

    A k larger than the pool clamps to the whole pool with a warning.
    """
    if not scores:
        raise EmptyPool()
    if top_k > len(scores):
        log.warning("top_k=%d exceeds pool size %d, clamping", top_k, len(scores))
        top_k = len(scores)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [key for key, _ in ranked[:top_k]]


def score_pool(model: dict, candidates: Mapping[str, tuple[int, int]],
               config: MiningConfig) -> dict[str, float]:
    """Score every candidate asset (key -> (width, height)) with the mock
    inference op."""
    return {
        key: score_prediction(
            mock_infer(model, key, width, height), config.scorer, config.aggregator
        )
        for key, (width, height) in candidates.items()
    }


def mine(model: dict, candidates: Mapping[str, tuple[int, int]],
         config: MiningConfig) -> list[str]:
    """In-process mining: inference + scoring + top-k selection."""
    return select_top_k(score_pool(model, candidates, config), config.top_k)
