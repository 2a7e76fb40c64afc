# forecasting/logistic.py
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from forecasting.features import FeatureSpec, LabeledTrip, TripFeatures, encode, encode_many
from utils.errors import DataError, InvariantViolation

logger = logging.getLogger(__name__)

DEFAULT_L2 = 1e-4
DEFAULT_MAX_ITERS = 10000
DEFAULT_TOL = 1e-8


class SingleClassData(DataError):
    pass


class DidNotConverge(UserWarning):
    """Training stopped at max_iters; the last iterate is attached"""

    def __init__(self, message: str, intercept: float = 0.0, weights: np.ndarray = None, grad_norm: float = np.inf):
        super().__init__(message)
        self.intercept = intercept
        self.weights = weights
        self.grad_norm = grad_norm


@dataclass(frozen=True, eq=False)
class LogisticModel:
    spec: FeatureSpec
    intercept: float
    weights: np.ndarray
    l2_lambda: float
    n_iters: int = 0
    converged: bool = True

    def __post_init__(self):
        if len(self.weights) != self.spec.column_count:
            raise InvariantViolation(
                f"weights length {len(self.weights)} != spec column count {self.spec.column_count}")


def sigmoid(z):
    """Numerically stable logistic function"""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    exp_z = np.exp(z[~positive])
    out[~positive] = exp_z / (1.0 + exp_z)
    return out


def _objective(X: np.ndarray, y: np.ndarray, intercept: float, weights: np.ndarray, l2: float) -> float:
    z = intercept + X @ weights
    # mean of log(1 + e^z) - y z, plus ridge on the weights only
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * weights @ weights)


def _gradient(X: np.ndarray, y: np.ndarray, intercept: float, weights: np.ndarray, l2: float) -> np.ndarray:
    residual = sigmoid(intercept + X @ weights) - y
    n = len(y)
    return np.concatenate(([residual.sum() / n], X.T @ residual / n + l2 * weights))


def fit_logistic_arrays(
    X: np.ndarray,
    y: np.ndarray,
    l2_lambda: float = DEFAULT_L2,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> Tuple[float, np.ndarray, int, bool]:
    """Full-batch gradient descent with backtracking line search from zero.

    The trial step of each iteration is the Barzilai-Borwein step of the last
    two iterates, shrunk until the Armijo condition holds, so the run is fully
    deterministic for fixed inputs.
    Returns (intercept, weights, iterations, converged).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.zeros(X.shape[1] + 1)

    def loss(t):
        return _objective(X, y, t[0], t[1:], l2_lambda)

    def grad(t):
        return _gradient(X, y, t[0], t[1:], l2_lambda)

    g = grad(theta)
    f = loss(theta)
    step = 1.0
    prev_theta, prev_g = None, None

    for iteration in range(max_iters):
        if np.max(np.abs(g)) < tol:
            return float(theta[0]), theta[1:].copy(), iteration, True

        if prev_theta is not None:
            s, r = theta - prev_theta, g - prev_g
            sr = float(s @ r)
            if sr > 0:
                step = float(s @ s) / sr

        g_sq = float(g @ g)
        while True:
            candidate = theta - step * g
            f_new = loss(candidate)
            if f_new <= f - 0.5 * step * g_sq or step < 1e-16:
                break
            step *= 0.5

        prev_theta, prev_g = theta, g
        theta, f = candidate, f_new
        g = grad(theta)

    converged = bool(np.max(np.abs(g)) < tol)
    return float(theta[0]), theta[1:].copy(), max_iters, converged


def train_logistic(
    data: Sequence[LabeledTrip],
    spec: FeatureSpec,
    l2_lambda: float = DEFAULT_L2,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> LogisticModel:
    """Fit a ridge-penalized logistic regression on labeled trips"""
    if not data:
        raise DataError("Cannot train on an empty dataset")
    y = np.array([row.label for row in data], dtype=float)
    if y.min() == y.max():
        raise SingleClassData(f"All {len(y)} training labels are {int(y[0])}")
    if l2_lambda < 0:
        raise DataError("l2_lambda must be nonnegative")

    X = encode_many([row.features for row in data], spec)
    intercept, weights, n_iters, converged = fit_logistic_arrays(X, y, l2_lambda, max_iters, tol)

    if not converged:
        grad_norm = float(np.max(np.abs(_gradient(X, y, intercept, weights, l2_lambda))))
        message = (f"Logistic fit for {spec.name} stopped after {n_iters} iterations "
                   f"with gradient norm {grad_norm:.3g} >= {tol:g}")
        logger.warning(message)
        warnings.warn(DidNotConverge(message, intercept, weights, grad_norm))
    else:
        logger.info(f"Logistic fit for {spec.name} converged in {n_iters} iterations")

    return LogisticModel(spec, intercept, weights, l2_lambda, n_iters, converged)


def decision_function(model: LogisticModel, rows: Sequence[TripFeatures]) -> np.ndarray:
    return model.intercept + encode_many(rows, model.spec) @ model.weights


def predict_proba(model: LogisticModel, features: TripFeatures) -> float:
    """Pr[disruption | features] = sigmoid(b0 + b1 . x)"""
    z = model.intercept + float(encode(features, model.spec) @ model.weights)
    return float(sigmoid(np.array([z]))[0])


def predict_proba_many(model: LogisticModel, rows: Sequence[TripFeatures]) -> np.ndarray:
    if not rows:
        return np.zeros(0)
    return sigmoid(decision_function(model, rows))
