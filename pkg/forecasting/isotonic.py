# forecasting/isotonic.py
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from utils.errors import DataError


class LengthMismatch(DataError):
    pass


class Empty(DataError):
    pass


class EmptyCalibrator(DataError):
    pass


@dataclass(frozen=True)
class IsotonicCalibrator:
    """Monotone map from raw scores to probabilities, linear between breakpoints"""

    breakpoints: Tuple[Tuple[float, float], ...]

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for s, _ in self.breakpoints], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([p for _, p in self.breakpoints], dtype=float)

    def to_list(self) -> List[List[float]]:
        return [[s, p] for s, p in self.breakpoints]

    @classmethod
    def from_list(cls, pairs: Sequence[Sequence[float]]) -> 'IsotonicCalibrator':
        return cls(tuple((float(s), float(p)) for s, p in pairs))


def _check_pair(scores: Sequence[float], labels: Sequence[float]):
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if len(scores) == 0:
        raise Empty("Cannot fit on empty input")


def pool_adjacent_violators(values: Sequence[float], weights: Sequence[float]) -> List[float]:
    """Weighted least-squares nondecreasing fit, one value per input block"""
    # each block: [weighted sum, total weight, number of inputs]
    stack: List[List[float]] = []
    for value, weight in zip(values, weights):
        stack.append([value * weight, weight, 1])
        while len(stack) > 1 and stack[-2][0] / stack[-2][1] > stack[-1][0] / stack[-1][1]:
            top = stack.pop()
            stack[-1][0] += top[0]
            stack[-1][1] += top[1]
            stack[-1][2] += top[2]

    fitted: List[float] = []
    for total, weight, count in stack:
        fitted.extend([total / weight] * int(count))
    return fitted


def fit_isotonic(scores: Sequence[float], labels: Sequence[float]) -> IsotonicCalibrator:
    """Isotonic regression of labels on scores; tied scores are pooled first"""
    _check_pair(scores, labels)
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)

    order = np.argsort(scores, kind='mergesort')
    distinct, starts, counts = np.unique(scores[order], return_index=True, return_counts=True)
    sums = np.add.reduceat(labels[order], starts)

    fitted = pool_adjacent_violators(sums / counts, counts.astype(float))
    return IsotonicCalibrator(tuple(
        (float(s), float(min(1.0, max(0.0, p)))) for s, p in zip(distinct, fitted)
    ))


def calibrate(cal: IsotonicCalibrator, raw: float) -> float:
    """Calibrated probability of one raw score"""
    if not cal.breakpoints:
        raise EmptyCalibrator("Calibrator has no breakpoints")
    return float(np.interp(raw, cal.scores, cal.values))


def calibrate_many(cal: IsotonicCalibrator, raw: Sequence[float]) -> np.ndarray:
    if not cal.breakpoints:
        raise EmptyCalibrator("Calibrator has no breakpoints")
    return np.interp(np.asarray(raw, dtype=float), cal.scores, cal.values)
