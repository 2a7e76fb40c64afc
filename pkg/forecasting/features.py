# forecasting/features.py
"""Trip covariates and their one-hot / standardized encoding."""
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from transit_data.schedule import RouteDirection
from utils.errors import DataError


class RidershipCategory(str, Enum):
    LOW = 'low'
    MODERATE = 'moderate'
    HIGH = 'high'
    OVER_CAPACITY = 'over_capacity'


class ServiceWindow(str, Enum):
    EARLY_MORNING = 'early_morning'
    MORNING = 'morning'
    MIDDAY = 'midday'
    AFTERNOON = 'afternoon'
    EVENING = 'evening'


class DayOfWeek(str, Enum):
    MON = 'mon'
    TUE = 'tue'
    WED = 'wed'
    THU = 'thu'
    FRI = 'fri'
    SAT = 'sat'
    SUN = 'sun'

    @classmethod
    def for_date(cls, day: date) -> 'DayOfWeek':
        return list(cls)[day.weekday()]


class CategoricalFeature(str, Enum):
    ROUTE_DIRECTION = 'route_direction'
    SERVICE_WINDOW = 'service_window'
    DAY_OF_WEEK = 'day_of_week'
    RIDERSHIP_CATEGORY = 'ridership_category'
    YEAR = 'year'
    MONTH = 'month'


class NumericalFeature(str, Enum):
    PRECIPITATION = 'precipitation'
    TEMPERATURE = 'temperature'


ALL_CATEGORICALS: Tuple[CategoricalFeature, ...] = tuple(CategoricalFeature)
ALL_NUMERICALS: Tuple[NumericalFeature, ...] = tuple(NumericalFeature)

# start hour of each window; EVENING runs to midnight
_WINDOW_STARTS = (
    (4, ServiceWindow.EARLY_MORNING),
    (6, ServiceWindow.MORNING),
    (9, ServiceWindow.MIDDAY),
    (14, ServiceWindow.AFTERNOON),
    (18, ServiceWindow.EVENING),
)


class UnseenLevel(DataError):
    def __init__(self, feature: str, level: str):
        self.feature, self.level = feature, level
        super().__init__(f"Level {level!r} of feature {feature!r} was not seen at training time")


def service_window_for(seconds: float) -> ServiceWindow:
    """Service window containing a time of day given in seconds since midnight"""
    hour = seconds / 3600.0
    if hour < 4 or hour >= 24:
        raise DataError(f"Time {seconds}s lies outside the 4AM-midnight service day")
    window = ServiceWindow.EARLY_MORNING
    for start, candidate in _WINDOW_STARTS:
        if hour >= start:
            window = candidate
    return window


def ridership_category_for(load: float, capacity: float) -> RidershipCategory:
    """Occupancy bucket of a trip's peak load"""
    rate = load / capacity
    if rate < 0.3:
        return RidershipCategory.LOW
    if rate < 0.6:
        return RidershipCategory.MODERATE
    if rate <= 1.0:
        return RidershipCategory.HIGH
    return RidershipCategory.OVER_CAPACITY


@dataclass(frozen=True)
class TripFeatures:
    route_direction: RouteDirection
    ridership_category: RidershipCategory
    service_window: ServiceWindow
    year: int
    month: int
    day_of_week: DayOfWeek
    precipitation_intensity: float
    temperature: float

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise DataError(f"month must be 1-12, got {self.month}")
        if self.precipitation_intensity < 0:
            raise DataError("precipitation_intensity must be nonnegative")

    def level(self, feature: CategoricalFeature) -> str:
        if feature is CategoricalFeature.ROUTE_DIRECTION:
            return self.route_direction.label
        if feature is CategoricalFeature.SERVICE_WINDOW:
            return self.service_window.value
        if feature is CategoricalFeature.DAY_OF_WEEK:
            return self.day_of_week.value
        if feature is CategoricalFeature.RIDERSHIP_CATEGORY:
            return self.ridership_category.value
        if feature is CategoricalFeature.YEAR:
            return str(self.year)
        return f"{self.month:02d}"

    def value(self, feature: NumericalFeature) -> float:
        if feature is NumericalFeature.PRECIPITATION:
            return float(self.precipitation_intensity)
        return float(self.temperature)


@dataclass(frozen=True)
class LabeledTrip:
    features: TripFeatures
    label: int
    trip_id: str = ''

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class FeatureSpec:
    """Which features enter the model and where each one-hot level lives"""

    included_categoricals: Tuple[CategoricalFeature, ...]
    included_numericals: Tuple[NumericalFeature, ...]
    levels: Dict[CategoricalFeature, Tuple[str, ...]] = field(default_factory=dict)
    means: Dict[NumericalFeature, float] = field(default_factory=dict)
    stds: Dict[NumericalFeature, float] = field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        names = [f"{feature.value}={level}"
                 for feature in self.included_categoricals for level in self.levels[feature]]
        return names + [feature.value for feature in self.included_numericals]

    @property
    def column_count(self) -> int:
        return sum(len(self.levels[f]) for f in self.included_categoricals) + len(self.included_numericals)

    @property
    def encoding_map(self) -> Dict[Tuple[CategoricalFeature, str], int]:
        mapping, index = {}, 0
        for feature in self.included_categoricals:
            for level in self.levels[feature]:
                mapping[(feature, level)] = index
                index += 1
        return mapping

    @property
    def name(self) -> str:
        parts = [f.value for f in self.included_categoricals] + [f.value for f in self.included_numericals]
        return '+'.join(parts) if parts else 'intercept_only'

    def to_dict(self) -> Dict:
        return {
            'categoricals': [f.value for f in self.included_categoricals],
            'numericals': [f.value for f in self.included_numericals],
            'levels': {f.value: list(self.levels[f]) for f in self.included_categoricals},
            'means': {f.value: self.means[f] for f in self.included_numericals},
            'stds': {f.value: self.stds[f] for f in self.included_numericals},
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'FeatureSpec':
        cats = tuple(CategoricalFeature(v) for v in data['categoricals'])
        nums = tuple(NumericalFeature(v) for v in data['numericals'])
        return cls(
            included_categoricals=cats,
            included_numericals=nums,
            levels={f: tuple(data['levels'][f.value]) for f in cats},
            means={f: float(data['means'][f.value]) for f in nums},
            stds={f: float(data['stds'][f.value]) for f in nums},
        )


def _canonical(selected: Iterable, universe: Sequence) -> Tuple:
    chosen = set(selected)
    return tuple(f for f in universe if f in chosen)


def build_feature_spec(
    data: Sequence[LabeledTrip],
    categoricals: Iterable[CategoricalFeature],
    numericals: Iterable[NumericalFeature],
    extra_levels_from: Optional[Sequence[LabeledTrip]] = None,
) -> FeatureSpec:
    """Derive level lists and standardization stats from training rows.

    Level names may additionally be collected from ``extra_levels_from`` (for
    example a test split) so that evaluation never hits an unseen level; the
    numeric statistics always come from ``data`` alone.
    """
    cats = _canonical(categoricals, ALL_CATEGORICALS)
    nums = _canonical(numericals, ALL_NUMERICALS)
    level_rows = list(data) + list(extra_levels_from or ())
    levels = {f: tuple(sorted({row.features.level(f) for row in level_rows})) for f in cats}

    means, stds = {}, {}
    for f in nums:
        values = np.array([row.features.value(f) for row in data], dtype=float)
        mean = float(values.mean()) if values.size else 0.0
        std = float(values.std()) if values.size else 0.0
        means[f] = mean
        stds[f] = std if std > 0 else 1.0
    return FeatureSpec(cats, nums, levels, means, stds)


def encode(features: TripFeatures, spec: FeatureSpec) -> np.ndarray:
    """Encode one trip as a real vector aligned with ``spec.columns``"""
    mapping = spec.encoding_map
    vector = np.zeros(spec.column_count, dtype=float)
    for feature in spec.included_categoricals:
        level = features.level(feature)
        if (feature, level) not in mapping:
            raise UnseenLevel(feature.value, level)
        vector[mapping[(feature, level)]] = 1.0
    for offset, feature in enumerate(spec.included_numericals, start=len(mapping)):
        vector[offset] = (features.value(feature) - spec.means[feature]) / spec.stds[feature]
    return vector


def encode_many(rows: Sequence[TripFeatures], spec: FeatureSpec) -> np.ndarray:
    """Design matrix for many trips"""
    mapping = spec.encoding_map
    matrix = np.zeros((len(rows), spec.column_count), dtype=float)
    for feature in spec.included_categoricals:
        for r, features in enumerate(rows):
            level = features.level(feature)
            if (feature, level) not in mapping:
                raise UnseenLevel(feature.value, level)
            matrix[r, mapping[(feature, level)]] = 1.0
    for offset, feature in enumerate(spec.included_numericals, start=len(mapping)):
        values = np.array([features.value(feature) for features in rows], dtype=float)
        matrix[:, offset] = (values - spec.means[feature]) / spec.stds[feature]
    return matrix
