"""Active-learning informativeness scorers.

Each scorer maps one predicted box's class-probability vector to a
score in [0,1] (1 = most informative); an image score aggregates its
box scores with max or mean. An image with no predicted boxes scores
1.0: nothing detected is treated as maximal uncertainty so blind spots
surface for labeling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import DegenerateClassCount

SCORERS = ("least_confidence", "margin", "entropy")
AGGREGATORS = ("max", "mean")

PROB_SUM_TOLERANCE = 1e-6  # class mass may undershoot 1 (implicit background)


@dataclass(frozen=True)
class PredictedBox:
    class_probs: tuple[float, ...]
    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self):
        object.__setattr__(self, "class_probs", tuple(float(p) for p in self.class_probs))
        if not self.class_probs:
            raise ValueError("class_probs must have at least one entry")
        for p in self.class_probs:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"class probability outside [0,1]: {p}")
        if sum(self.class_probs) > 1.0 + PROB_SUM_TOLERANCE:
            raise ValueError(f"class probabilities sum to {sum(self.class_probs)} > 1")


@dataclass(frozen=True)
class Prediction:
    asset_key: str
    boxes: tuple[PredictedBox, ...]


def box_least_confidence(probs) -> float:
    return 1.0 - max(probs)


def box_margin(probs) -> float:
    ranked = sorted(probs, reverse=True)
    first = ranked[0]
    second = ranked[1] if len(ranked) > 1 else 0.0
    return 1.0 - (first - second)


def box_entropy(probs) -> float:
    """Shannon entropy of the renormalized vector, scaled by ln(C) so the
    uniform distribution scores exactly 1. A zero-mass vector is treated
    as uniform (maximal uncertainty)."""
    count = len(probs)
    if count < 2:
        raise DegenerateClassCount(count)
    total = sum(probs)
    if total <= 0.0:
        return 1.0
    entropy = 0.0
    for p in probs:
        p /= total
        if p > 0.0:
            entropy -= p * math.log(p)
    return entropy / math.log(count)


_BOX_SCORERS = {
    "least_confidence": box_least_confidence,
    "margin": box_margin,
    "entropy": box_entropy,
}


def score_prediction(pred: Prediction, scorer: str = "least_confidence",
                     aggregator: str = "max") -> float:
    if scorer not in _BOX_SCORERS:
        raise ValueError(f"unknown scorer: {scorer!r}")
    if aggregator not in AGGREGATORS:
        raise ValueError(f"unknown aggregator: {aggregator!r}")
    if not pred.boxes:
        return 1.0
    box_fn = _BOX_SCORERS[scorer]
    scores = [box_fn(box.class_probs) for box in pred.boxes]
    if aggregator == "max":
        return max(scores)
    return sum(scores) / len(scores)
