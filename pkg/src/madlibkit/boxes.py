"""Scored bounding boxes, IoU, greedy NMS, and top-k selection.

Boxes are continuous rectangles: (x, y) is the top-left corner, w and h are
real-valued extents, and areas are plain products (no pixel +1 convention).
All operations are pure; suppression and ranking are fully deterministic,
with score ties broken by original input index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

__all__ = ["ScoredBox", "iou", "greedy_nms", "greedy_nms_indices", "select_top_k", "top_k_indices"]


@dataclass(frozen=True)
class ScoredBox:
    """A rectangle with an objectness confidence score."""

    x: float
    y: float
    w: float
    h: float
    score: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h", "score"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidInputError(f"box field {name!r} is not finite: {value!r}")
            object.__setattr__(self, name, value)
        if self.w <= 0 or self.h <= 0:
            raise InvalidInputError(f"box extents must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: ScoredBox, b: ScoredBox) -> float:
    """Intersection over union of two boxes, in [0, 1]; 0 when disjoint."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _score_order(boxes: Sequence[ScoredBox]) -> np.ndarray:
    scores = np.array([b.score for b in boxes], dtype=np.float64)
    # stable sort on the negated scores: descending score, ascending input index
    return np.argsort(-scores, kind="stable")


def greedy_nms_indices(boxes: Sequence[ScoredBox], beta: float) -> list[int]:
    """Indices of the boxes kept by greedy NMS, in score-descending order.

    Scans candidates by descending score (ties by input index); the best
    remaining box is kept and every remaining box whose IoU with it is
    strictly greater than ``beta`` is removed. A box at exactly ``beta``
    overlap survives.
    """
    beta = float(beta)
    if not (0.0 <= beta <= 1.0):
        raise InvalidInputError(f"beta must be in [0, 1], got {beta}")
    if len(boxes) == 0:
        return []

    x1 = np.array([b.x for b in boxes], dtype=np.float64)
    y1 = np.array([b.y for b in boxes], dtype=np.float64)
    x2 = np.array([b.x + b.w for b in boxes], dtype=np.float64)
    y2 = np.array([b.y + b.h for b in boxes], dtype=np.float64)
    areas = np.array([b.w * b.h for b in boxes], dtype=np.float64)

    order = _score_order(boxes)
    keep: list[int] = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        iw = np.maximum(0.0, np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest]))
        ih = np.maximum(0.0, np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest]))
        inter = iw * ih
        overlap = inter / (areas[i] + areas[rest] - inter)
        order = rest[overlap <= beta]
    return keep


def greedy_nms(boxes: Sequence[ScoredBox], beta: float) -> list[ScoredBox]:
    """Greedy non-maximum suppression; see :func:`greedy_nms_indices`."""
    return [boxes[i] for i in greedy_nms_indices(boxes, beta)]


def top_k_indices(boxes: Sequence[ScoredBox], k: int) -> list[int]:
    """Indices of the min(k, len) highest-scoring boxes, score-descending."""
    if k < 0:
        raise InvalidInputError(f"k must be >= 0, got {k}")
    order = _score_order(boxes)
    return [int(i) for i in order[: min(k, len(boxes))]]


def select_top_k(boxes: Sequence[ScoredBox], k: int) -> list[ScoredBox]:
    """The min(k, len) highest-scoring boxes, score-descending."""
    return [boxes[i] for i in top_k_indices(boxes, k)]
