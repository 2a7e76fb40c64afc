# forecasting/pipeline.py
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd

from forecasting.features import (
    CategoricalFeature, DayOfWeek, FeatureSpec, LabeledTrip, NumericalFeature,
    RidershipCategory, ServiceWindow, TripFeatures, build_feature_spec, service_window_for,
)
from forecasting.isotonic import IsotonicCalibrator, calibrate, calibrate_many, fit_isotonic
from forecasting.logistic import (
    DEFAULT_L2, DEFAULT_MAX_ITERS, DEFAULT_TOL, LogisticModel, predict_proba, predict_proba_many,
    train_logistic,
)
from transit_data.schedule import Direction, RouteDirection, Schedule, Trip
from utils.errors import DataError
from utils.schemas import read_artifact, validate_artifact

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

LABELED_COLUMNS = ['trip_id', 'route_id', 'direction', 'service_window', 'day_of_week',
                   'ridership_category', 'year', 'month', 'precip_in_hr', 'temp_f', 'label']
CONTEXT_COLUMNS = ['trip_id', 'ridership_category', 'precip_in_hr', 'temp_f']


class MissingContext(DataError):
    def __init__(self, trip_id: str):
        self.trip_id = trip_id
        super().__init__(f"No forecast context for trip {trip_id!r}")


class DisruptionClassifier(Protocol):
    def fit(self, data: Sequence[LabeledTrip]) -> 'DisruptionClassifier': ...

    def predict_proba(self, features: TripFeatures) -> float: ...

    def predict_proba_many(self, rows: Sequence[TripFeatures]) -> np.ndarray: ...


class LogisticDisruptionClassifier:
    """Logistic regression over a chosen feature set"""

    def __init__(
        self,
        categoricals: Iterable[CategoricalFeature],
        numericals: Iterable[NumericalFeature],
        l2_lambda: float = DEFAULT_L2,
        max_iters: int = DEFAULT_MAX_ITERS,
        tol: float = DEFAULT_TOL,
    ):
        self.categoricals = tuple(categoricals)
        self.numericals = tuple(numericals)
        self.l2_lambda = l2_lambda
        self.max_iters = max_iters
        self.tol = tol
        self.model: Optional[LogisticModel] = None

    def fit(self, data: Sequence[LabeledTrip], extra_levels_from: Sequence[LabeledTrip] = None):
        spec = build_feature_spec(data, self.categoricals, self.numericals, extra_levels_from)
        self.model = train_logistic(data, spec, self.l2_lambda, self.max_iters, self.tol)
        return self

    def predict_proba(self, features: TripFeatures) -> float:
        return predict_proba(self.model, features)

    def predict_proba_many(self, rows: Sequence[TripFeatures]) -> np.ndarray:
        return predict_proba_many(self.model, rows)


class CalibratedClassifier:
    """Any classifier followed by an isotonic map fit on held-out scores"""

    def __init__(self, base: DisruptionClassifier, calibrator: Optional[IsotonicCalibrator] = None):
        self.base = base
        self.calibrator = calibrator

    def fit(self, data: Sequence[LabeledTrip], calibration_data: Sequence[LabeledTrip] = None, **fit_options):
        """Fit the base model on ``data`` and the calibrator on ``calibration_data`` (default: ``data``).

        A calibration sample holding a single class cannot rank anything; the
        calibrator is then left out and predictions stay raw.
        """
        self.base.fit(data, **fit_options)
        calibration_data = calibration_data or data
        labels = [row.label for row in calibration_data]
        if len(set(labels)) < 2:
            logger.warning(f"Calibration sample of {len(labels)} trips holds a single class, skipping calibration")
            self.calibrator = None
            return self
        scores = self.base.predict_proba_many([row.features for row in calibration_data])
        self.calibrator = fit_isotonic(scores, labels)
        return self

    def predict_proba(self, features: TripFeatures) -> float:
        raw = self.base.predict_proba(features)
        return raw if self.calibrator is None else calibrate(self.calibrator, raw)

    def predict_proba_many(self, rows: Sequence[TripFeatures]) -> np.ndarray:
        raw = self.base.predict_proba_many(rows)
        return raw if self.calibrator is None else calibrate_many(self.calibrator, raw)


def save_model(model: LogisticModel, calibrator: Optional[IsotonicCalibrator], path: str) -> str:
    """Persist model and calibrator as one versioned JSON document"""
    document = {
        'v': MODEL_FORMAT_VERSION,
        'spec': model.spec.to_dict(),
        'intercept': model.intercept,
        'weights': [float(w) for w in model.weights],
        'l2_lambda': model.l2_lambda,
        'standardization': {
            'means': {f.value: model.spec.means[f] for f in model.spec.included_numericals},
            'stds': {f.value: model.spec.stds[f] for f in model.spec.included_numericals},
        },
        'calibrator': calibrator.to_list() if calibrator is not None else None,
    }
    validate_artifact(document, 'model')
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2)
    logger.info(f"Model saved to {path}")
    return path


def load_model(path: str) -> Tuple[LogisticModel, Optional[IsotonicCalibrator]]:
    document = read_artifact(path, 'model')
    if document['v'] != MODEL_FORMAT_VERSION:
        raise DataError(f"Unsupported model format version {document['v']!r}")
    spec = FeatureSpec.from_dict(document['spec'])
    model = LogisticModel(spec, float(document['intercept']), np.array(document['weights'], dtype=float),
                          float(document.get('l2_lambda', DEFAULT_L2)))
    pairs = document.get('calibrator')
    return model, (IsotonicCalibrator.from_list(pairs) if pairs else None)


def read_labeled_trips(path: str) -> List[LabeledTrip]:
    if not os.path.exists(path):
        raise DataError(f"Labeled trips file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != LABELED_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(LABELED_COLUMNS)}")
    rows = []
    for line, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            features = TripFeatures(
                route_direction=RouteDirection(row.route_id, Direction(row.direction)),
                ridership_category=RidershipCategory(row.ridership_category),
                service_window=ServiceWindow(row.service_window),
                year=int(row.year),
                month=int(row.month),
                day_of_week=DayOfWeek(row.day_of_week),
                precipitation_intensity=float(row.precip_in_hr),
                temperature=float(row.temp_f),
            )
            rows.append(LabeledTrip(features, int(row.label), row.trip_id))
        except ValueError as e:
            raise DataError(f"{path}:{line}: {e}") from e
    logger.info(f"Read {len(rows)} labeled trips from {path}")
    return rows


def write_labeled_trips(rows: Sequence[LabeledTrip], path: str) -> str:
    frame = pd.DataFrame([{
        'trip_id': row.trip_id,
        'route_id': row.features.route_direction.route_id,
        'direction': row.features.route_direction.direction.value,
        'service_window': row.features.service_window.value,
        'day_of_week': row.features.day_of_week.value,
        'ridership_category': row.features.ridership_category.value,
        'year': row.features.year,
        'month': row.features.month,
        'precip_in_hr': repr(float(row.features.precipitation_intensity)),
        'temp_f': repr(float(row.features.temperature)),
        'label': row.label,
    } for row in rows], columns=LABELED_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')
    return path


@dataclass(frozen=True)
class TripContext:
    """Per-trip inputs the schedule does not carry: weather and expected crowding"""

    ridership_category: RidershipCategory
    precipitation_intensity: float
    temperature: float


def read_trip_context(path: str) -> Dict[str, TripContext]:
    if not os.path.exists(path):
        raise DataError(f"Trip context file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != CONTEXT_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(CONTEXT_COLUMNS)}")
    try:
        return {row.trip_id: TripContext(RidershipCategory(row.ridership_category),
                                         float(row.precip_in_hr), float(row.temp_f))
                for row in frame.itertuples(index=False)}
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e


def write_trip_context(context: Dict[str, TripContext], path: str) -> str:
    pd.DataFrame([{
        'trip_id': trip_id,
        'ridership_category': ctx.ridership_category.value,
        'precip_in_hr': repr(float(ctx.precipitation_intensity)),
        'temp_f': repr(float(ctx.temperature)),
    } for trip_id, ctx in sorted(context.items())], columns=CONTEXT_COLUMNS).to_csv(
        path, index=False, lineterminator='\n')
    return path


def trip_features(trip: Trip, context: TripContext) -> TripFeatures:
    """Feature vector of a scheduled trip under the given context"""
    return TripFeatures(
        route_direction=trip.route_direction,
        ridership_category=context.ridership_category,
        service_window=service_window_for(trip.start_s),
        year=trip.service_date.year,
        month=trip.service_date.month,
        day_of_week=DayOfWeek.for_date(trip.service_date),
        precipitation_intensity=context.precipitation_intensity,
        temperature=context.temperature,
    )


def forecast_day(
    model: LogisticModel,
    cal: Optional[IsotonicCalibrator],
    schedule: Schedule,
    context: Dict[str, TripContext],
) -> Dict[str, float]:
    """Calibrated disruption probability of every trip in the schedule"""
    trip_ids = sorted(schedule.trips)
    for trip_id in trip_ids:
        if trip_id not in context:
            raise MissingContext(trip_id)
    if not trip_ids:
        return {}
    rows = [trip_features(schedule.trips[t], context[t]) for t in trip_ids]
    probabilities = predict_proba_many(model, rows)
    if cal is not None:
        probabilities = calibrate_many(cal, probabilities)
    logger.info(f"Forecast {len(trip_ids)} trips, mean disruption probability {float(np.mean(probabilities)):.4f}")
    return {trip_id: float(p) for trip_id, p in zip(trip_ids, probabilities)}
