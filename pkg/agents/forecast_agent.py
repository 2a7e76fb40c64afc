# agents/forecast_agent.py
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from agents.base import BaseAgent
from forecasting.evaluation import (
    cross_entropy, disruption_counts_by_route, log_odds_table, permutation_matrix, select_feature_set,
    selection_table, train_test_split,
)
from forecasting.features import ALL_CATEGORICALS, ALL_NUMERICALS, CategoricalFeature, LabeledTrip, NumericalFeature
from forecasting.isotonic import calibrate_many
from forecasting.logistic import DEFAULT_L2, predict_proba_many
from forecasting.pipeline import (
    CalibratedClassifier, LogisticDisruptionClassifier, load_model, read_labeled_trips, save_model, write_labeled_trips,
)
from utils.errors import ConfigError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

# Year is a candidate for selection but left out of the default model
DEFAULT_CATEGORICALS = tuple(f for f in ALL_CATEGORICALS if f is not CategoricalFeature.YEAR)


def parse_features(names: Optional[Sequence[str]]):
    """Split user-facing feature names into (categoricals, numericals)"""
    if names is None:
        return DEFAULT_CATEGORICALS, ALL_NUMERICALS
    categoricals, numericals = [], []
    for name in names:
        if name in {f.value for f in CategoricalFeature}:
            categoricals.append(CategoricalFeature(name))
        elif name in {f.value for f in NumericalFeature}:
            numericals.append(NumericalFeature(name))
        else:
            raise ConfigError(f"Unknown feature {name!r}")
    return tuple(categoricals), tuple(numericals)


def _scores(model, calibrator, rows: Sequence[LabeledTrip]) -> Dict[str, float]:
    features = [row.features for row in rows]
    labels = [row.label for row in rows]
    raw = predict_proba_many(model, features)
    scores = {'raw': cross_entropy(raw, labels)}
    if calibrator is not None:
        scores['calibrated'] = cross_entropy(calibrate_many(calibrator, raw), labels)
    return scores


class ForecastAgent(BaseAgent):
    """Trains, evaluates and analyses the trip disruption model"""

    def __init__(self, name: str = "ForecastAgent"):
        super().__init__(name)

    def _split(self, labeled_path: str, out_dir: str, seed: int, test_fraction: float):
        data = read_labeled_trips(labeled_path)
        train, test = train_test_split(data, test_fraction, seed)
        os.makedirs(out_dir, exist_ok=True)
        paths = [write_labeled_trips(train, os.path.join(out_dir, 'train_split.csv')),
                 write_labeled_trips(test, os.path.join(out_dir, 'test_split.csv'))]
        logger.info(f"{self.name}: {len(train)} training and {len(test)} test trips")
        return train, test, paths

    def train(self, labeled_path: str, out_dir: str, seed: int, features: Optional[List[str]] = None,
              test_fraction: float = 0.2, l2_lambda: float = DEFAULT_L2,
              calibration_fraction: float = 0.25) -> Dict[str, Any]:
        """Fit on one part of the training split and calibrate on the rest of it"""
        logger.info(f"{self.name}: Training disruption model on {labeled_path}...")
        started = datetime.now()
        try:
            categoricals, numericals = parse_features(features)
            if not 0.0 < calibration_fraction < 1.0:
                raise ConfigError("calibration_fraction must lie in (0, 1)")
            data = read_labeled_trips(labeled_path)
            train, test = train_test_split(data, test_fraction, seed)
            fit_rows, calibration_rows = train_test_split(train, calibration_fraction, derive_seed(seed, 1))
            os.makedirs(out_dir, exist_ok=True)
            outputs = [write_labeled_trips(fit_rows, os.path.join(out_dir, 'train_split.csv')),
                       write_labeled_trips(calibration_rows, os.path.join(out_dir, 'calibration_split.csv')),
                       write_labeled_trips(test, os.path.join(out_dir, 'test_split.csv'))]
            logger.info(f"{self.name}: {len(fit_rows)} training, {len(calibration_rows)} calibration "
                        f"and {len(test)} test trips")

            classifier = CalibratedClassifier(LogisticDisruptionClassifier(categoricals, numericals, l2_lambda))
            classifier.fit(fit_rows, calibration_data=calibration_rows,
                           extra_levels_from=list(calibration_rows) + list(test))
            model, calibrator = classifier.base.model, classifier.calibrator

            train_scores = _scores(model, calibrator, fit_rows)
            calibration_scores = _scores(model, calibrator, calibration_rows) if calibration_rows else {}
            test_scores = _scores(model, calibrator, test) if test else {}
            metrics = {
                'features': model.spec.name,
                'n_train': len(fit_rows),
                'n_calibration': len(calibration_rows),
                'n_test': len(test),
                'positives_train': sum(r.label for r in fit_rows),
                'positives_calibration': sum(r.label for r in calibration_rows),
                'converged': model.converged,
                'n_iters': model.n_iters,
                'raw': {'train_ce': train_scores['raw'], 'calibration_ce': calibration_scores.get('raw'),
                        'test_ce': test_scores.get('raw')},
                'calibrated': {'train_ce': train_scores.get('calibrated'),
                               'calibration_ce': calibration_scores.get('calibrated'),
                               'test_ce': test_scores.get('calibrated')},
            }

            outputs.append(save_model(model, calibrator, os.path.join(out_dir, 'model.json')))
            metrics_path = os.path.join(out_dir, 'metrics.json')
            with open(metrics_path, 'w', encoding='utf-8') as f:
                json.dump(metrics, f, indent=2)
            outputs.append(metrics_path)
            log_odds_path = os.path.join(out_dir, 'log_odds.csv')
            log_odds_table(model).to_csv(log_odds_path, index=False, lineterminator='\n')
            outputs.append(log_odds_path)

            config = {'features': [f.value for f in categoricals + numericals], 'test_fraction': test_fraction,
                      'calibration_fraction': calibration_fraction, 'l2_lambda': l2_lambda}
            manifest = self._write_manifest('forecast train', config, seed, [labeled_path], outputs, out_dir, started)
            logger.info(f"{self.name}: Model trained, train CE {train_scores['raw']:.5f}")
            return {'status': 'success', 'metrics': metrics, 'files': outputs, 'manifest': manifest,
                    'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)

    def evaluate(self, model_path: str, labeled_paths: Sequence[str], out_dir: str, seed: int) -> Dict[str, Any]:
        """Raw and calibrated cross-entropy side by side, one row per labeled file"""
        logger.info(f"{self.name}: Evaluating {model_path} on {len(labeled_paths)} file(s)...")
        started = datetime.now()
        try:
            if not labeled_paths:
                raise ConfigError("forecast eval needs at least one labeled file")
            model, calibrator = load_model(model_path)
            records = []
            for path in labeled_paths:
                rows = read_labeled_trips(path)
                scores = _scores(model, calibrator, rows)
                records.append({
                    'data': os.path.basename(path),
                    'n': len(rows),
                    'positives': sum(r.label for r in rows),
                    'raw_ce': scores['raw'],
                    'calibrated_ce': scores.get('calibrated'),
                })
            table = pd.DataFrame(records, columns=['data', 'n', 'positives', 'raw_ce', 'calibrated_ce'])

            os.makedirs(out_dir, exist_ok=True)
            csv_path = os.path.join(out_dir, 'eval.csv')
            table.to_csv(csv_path, index=False, lineterminator='\n')
            json_path = os.path.join(out_dir, 'eval.json')
            with open(json_path, 'w', encoding='utf-8') as f:
                json.dump({'model': model.spec.name, 'results': records}, f, indent=2)
            outputs = [csv_path, json_path]
            manifest = self._write_manifest('forecast eval', {}, seed, [model_path, *labeled_paths], outputs,
                                            out_dir, started)
            return {'status': 'success', 'table': table, 'files': outputs, 'manifest': manifest,
                    'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)

    def select_features(self, labeled_path: str, out_dir: str, seed: int, threads: int = 1,
                        candidates: Optional[List[str]] = None, test_fraction: float = 0.2,
                        l2_lambda: float = DEFAULT_L2) -> Dict[str, Any]:
        """Rank every subset of the candidate categoricals by test cross-entropy"""
        logger.info(f"{self.name}: Running feature-subset selection...")
        started = datetime.now()
        try:
            if candidates is None:
                categoricals = ALL_CATEGORICALS
            else:
                categoricals, extra = parse_features(candidates)
                if extra:
                    raise ConfigError("Only categorical features are selection candidates")
            train, test, outputs = self._split(labeled_path, out_dir, seed, test_fraction)
            rows = select_feature_set(train, test, categoricals, ALL_NUMERICALS, l2_lambda, threads=threads)
            table = selection_table(rows)
            path = os.path.join(out_dir, 'feature_selection.csv')
            table.to_csv(path, index=False, lineterminator='\n')
            outputs.append(path)

            config = {'candidates': [f.value for f in categoricals], 'test_fraction': test_fraction,
                      'l2_lambda': l2_lambda}
            manifest = self._write_manifest('forecast select-features', config, seed, [labeled_path], outputs,
                                            out_dir, started)
            return {'status': 'success', 'table': table, 'files': outputs, 'manifest': manifest,
                    'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)

    def permutation_test(self, labeled_path: str, out_dir: str, seed: int, n_perm: int = 9999) -> Dict[str, Any]:
        """Pairwise route p-values for the disruption counts per trip"""
        logger.info(f"{self.name}: Permutation tests with {n_perm} permutations...")
        started = datetime.now()
        try:
            counts = disruption_counts_by_route(read_labeled_trips(labeled_path))
            matrix = permutation_matrix(counts, n_perm, seed)
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, 'permutation_matrix.csv')
            matrix.to_csv(path, lineterminator='\n')
            manifest = self._write_manifest('forecast perm-test', {'n_perm': n_perm}, seed, [labeled_path],
                                            [path], out_dir, started)
            return {'status': 'success', 'matrix': matrix, 'files': [path], 'manifest': manifest,
                    'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)
