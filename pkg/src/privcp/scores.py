"""Nonconformity scores and their inversion into prediction sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import PredictionSet

ABS_RESIDUAL = "ABS_RESIDUAL"
CQR = "CQR"


@dataclass(frozen=True)
class ScoreFunction:
    """A score kind bound to a fitted predictor.

    ``predict`` maps an (n, d) feature matrix to an (n,) mean prediction for
    ABS_RESIDUAL or an (n, 2) array of (lower, upper) quantiles for CQR.
    Crossed quantiles are kept as they are.
    """

    kind: str
    predict: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.kind not in (ABS_RESIDUAL, CQR):
            raise ValueError(f"unknown score kind {self.kind!r}")

    def _pred(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.predict(X), dtype=float)

    def scores(self, X, y) -> np.ndarray:
        """Vectorized scores for rows of X against labels y."""
        y = np.asarray(y, dtype=float)
        p = self._pred(X)
        if self.kind == ABS_RESIDUAL:
            return np.abs(p.reshape(-1) - y)
        p = p.reshape(-1, 2)
        return np.maximum(p[:, 0] - y, y - p[:, 1])

    def bounds(self, X, thresholds) -> tuple[np.ndarray, np.ndarray]:
        """Per-row interval endpoints of {y : score <= t}; lo > hi means empty."""
        p = self._pred(X)
        t = np.broadcast_to(np.asarray(thresholds, dtype=float), (p.shape[0],))
        if self.kind == ABS_RESIDUAL:
            center = p.reshape(-1)
            lo, hi = center - t, center + t
            # |f - y| <= t < 0 is impossible even when rounding merges lo and hi
            lo = np.where(t < 0, np.inf, lo)
            hi = np.where(t < 0, -np.inf, hi)
        else:
            p = p.reshape(-1, 2)
            lo, hi = p[:, 0] - t, p[:, 1] + t
        inf = np.isposinf(t)
        lo = np.where(inf, -np.inf, lo)
        hi = np.where(inf, np.inf, hi)
        return lo, hi


def score(sf: ScoreFunction, x, y: float) -> float:
    return float(sf.scores(np.atleast_2d(x), np.array([y]))[0])


def invert(sf: ScoreFunction, x, threshold: float, method: str | None = None) -> PredictionSet:
    """Exact set {y : score(x, y) <= threshold}."""
    provenance = {method: threshold} if method else {}
    if threshold == math.inf:
        return PredictionSet.full(provenance)
    lo, hi = sf.bounds(np.atleast_2d(x), threshold)
    if lo[0] > hi[0]:
        return PredictionSet.empty(provenance)
    return PredictionSet([(lo[0], hi[0])], provenance)


def abs_residual(predict) -> ScoreFunction:
    return ScoreFunction(ABS_RESIDUAL, predict)


def cqr(predict) -> ScoreFunction:
    return ScoreFunction(CQR, predict)
