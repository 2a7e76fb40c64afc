# forecasting/evaluation.py
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from forecasting.features import (
    ALL_CATEGORICALS, ALL_NUMERICALS, CategoricalFeature, FeatureSpec, LabeledTrip,
    NumericalFeature, build_feature_spec,
)
from forecasting.isotonic import Empty, LengthMismatch
from forecasting.logistic import (
    DEFAULT_L2, DEFAULT_MAX_ITERS, DEFAULT_TOL, LogisticModel, predict_proba_many, train_logistic,
)
from utils.errors import DataError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

EPSILON = 1e-15


class EmptySample(DataError):
    pass


def cross_entropy(predictions: Sequence[float], labels: Sequence[float]) -> float:
    """Mean binary cross-entropy with predictions clipped to [eps, 1-eps]"""
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if len(predictions) == 0:
        raise Empty("Cross-entropy of an empty sample is undefined")
    p = np.clip(np.asarray(predictions, dtype=float), EPSILON, 1.0 - EPSILON)
    y = np.asarray(labels, dtype=float)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def train_test_split(
    data: Sequence[LabeledTrip], test_fraction: float = 0.2, seed: int = 0,
) -> Tuple[List[LabeledTrip], List[LabeledTrip]]:
    """Seeded split, stratified by label, preserving input order inside each part"""
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test_index = set()
    for label in (0, 1):
        members = [i for i, row in enumerate(data) if row.label == label]
        n_test = int(round(len(members) * test_fraction))
        # keep at least one row of each class for training
        n_test = min(n_test, max(len(members) - 1, 0))
        if n_test:
            test_index.update(int(i) for i in rng.choice(members, size=n_test, replace=False))
    train = [row for i, row in enumerate(data) if i not in test_index]
    test = [row for i, row in enumerate(data) if i in test_index]
    return train, test


@dataclass(frozen=True)
class FeatureSelectionRow:
    spec: FeatureSpec
    train_ce: float
    test_ce: float


def _fit_and_score(train, test, categoricals, numericals, l2_lambda, max_iters, tol) -> FeatureSelectionRow:
    spec = build_feature_spec(train, categoricals, numericals, extra_levels_from=test)
    model = train_logistic(train, spec, l2_lambda, max_iters, tol)
    train_ce = cross_entropy(predict_proba_many(model, [r.features for r in train]), [r.label for r in train])
    test_ce = cross_entropy(predict_proba_many(model, [r.features for r in test]), [r.label for r in test])
    return FeatureSelectionRow(spec, train_ce, test_ce)


def select_feature_set(
    train: Sequence[LabeledTrip],
    test: Sequence[LabeledTrip],
    candidate_categoricals: Iterable[CategoricalFeature] = ALL_CATEGORICALS,
    numericals: Iterable[NumericalFeature] = ALL_NUMERICALS,
    l2_lambda: float = DEFAULT_L2,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
) -> List[FeatureSelectionRow]:
    """Train one model per subset of the candidate categoricals, best test CE first"""
    if not test:
        raise Empty("Feature selection needs a nonempty test split")
    candidates = tuple(f for f in ALL_CATEGORICALS if f in set(candidate_categoricals))
    numericals = tuple(numericals)
    subsets = [combo for r in range(len(candidates) + 1) for combo in itertools.combinations(candidates, r)]
    logger.info(f"Feature selection: training {len(subsets)} models on {len(train)} trips")

    def job(subset):
        return _fit_and_score(train, test, subset, numericals, l2_lambda, max_iters, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, subsets))
    else:
        rows = [job(subset) for subset in subsets]

    return sorted(rows, key=lambda row: (row.test_ce, row.spec.name))


def selection_table(rows: Sequence[FeatureSelectionRow]) -> pd.DataFrame:
    """Ranking as a table: one row per feature set"""
    return pd.DataFrame([{
        'rank': i + 1,
        'features': row.spec.name,
        'n_categoricals': len(row.spec.included_categoricals),
        'train_ce': row.train_ce,
        'test_ce': row.test_ce,
    } for i, row in enumerate(rows)])


def permutation_test(count_a: Sequence[float], count_b: Sequence[float], n_perm: int, seed: int) -> float:
    """Two-sided permutation p-value of the difference in means, +1 smoothed"""
    if len(count_a) == 0 or len(count_b) == 0:
        raise EmptySample("Both samples must be nonempty")
    if n_perm < 1:
        raise DataError("n_perm must be >= 1")
    a = np.sort(np.asarray(count_a, dtype=float))
    b = np.sort(np.asarray(count_b, dtype=float))
    # canonical argument order makes p(a, b) == p(b, a) bit for bit
    if (len(a), tuple(a)) > (len(b), tuple(b)):
        a, b = b, a

    observed = abs(a.mean() - b.mean())
    pooled = np.concatenate([a, b])
    n_a = len(a)
    rng = np.random.default_rng(seed)

    exceed = 0
    batch = 2048
    done = 0
    while done < n_perm:
        size = min(batch, n_perm - done)
        shuffled = np.tile(pooled, (size, 1))
        rng.permuted(shuffled, axis=1, out=shuffled)
        delta = np.abs(shuffled[:, :n_a].mean(axis=1) - shuffled[:, n_a:].mean(axis=1))
        exceed += int(np.count_nonzero(delta >= observed - 1e-12))
        done += size
    return (1 + exceed) / (n_perm + 1)


def disruption_counts_by_route(data: Sequence[LabeledTrip]) -> Dict[str, List[int]]:
    """Per-trip disruption counts grouped by route id"""
    counts: Dict[str, List[int]] = {}
    for row in data:
        counts.setdefault(row.features.route_direction.route_id, []).append(row.label)
    return dict(sorted(counts.items()))


def permutation_matrix(counts_by_route: Dict[str, Sequence[float]], n_perm: int, seed: int) -> pd.DataFrame:
    """Symmetric route x route table of permutation-test p-values"""
    routes = sorted(counts_by_route)
    matrix = np.ones((len(routes), len(routes)))
    for i, j in itertools.combinations(range(len(routes)), 2):
        p = permutation_test(counts_by_route[routes[i]], counts_by_route[routes[j]], n_perm, derive_seed(seed, i, j))
        matrix[i, j] = matrix[j, i] = p
    return pd.DataFrame(matrix, index=routes, columns=routes)


def log_odds_table(model: LogisticModel) -> pd.DataFrame:
    """Fitted log-odds and odds ratio of every model column, largest first"""
    rows = []
    for column, weight in zip(model.spec.columns, model.weights):
        feature, _, level = column.partition('=')
        rows.append({
            'feature': feature,
            'level': level,
            'log_odds': float(weight),
            'odds_ratio': float(np.exp(weight)),
        })
    table = pd.DataFrame(rows, columns=['feature', 'level', 'log_odds', 'odds_ratio'])
    return table.sort_values(['log_odds', 'feature', 'level'], ascending=[False, True, True]).reset_index(drop=True)
