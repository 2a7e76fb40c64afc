# scenarios/generator.py
"""Synthetic spoke-hub networks, trip histories and ridership for end-to-end runs.

Everything is a pure function of the GeneratorConfig: each concern draws from
its own seeded substream, so the written corpus is byte-identical across runs.
"""
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from typing import Dict, List, Optional, Tuple

import numpy as np
from dateutil.parser import isoparse

from config.settings import from_mapping
from forecasting.features import (
    ALL_CATEGORICALS, CategoricalFeature, LabeledTrip, NumericalFeature, RidershipCategory,
    ServiceWindow, TripFeatures, ridership_category_for,
)
from forecasting.logistic import sigmoid
from forecasting.pipeline import TripContext, trip_features, write_labeled_trips, write_trip_context
from simulator.chains import RidershipParams, sample_chains, write_chain, write_ridership_params
from transit_data.loader import save_schedule
from transit_data.schedule import Direction, RouteDirection, Schedule, Stop, StopTime, Trip
from utils.errors import ConfigError
from utils.schemas import validate_artifact
from utils.seeding import derive_seed, substream

logger = logging.getLogger(__name__)

MILES_PER_DEGREE_LAT = 69.0
MAX_CANDIDATES = 25
HUB_ID = 'HUB'
DEPOT_ID = 'DEPOT'

# substream keys
_WEATHER, _RIDERSHIP, _LABELS, _TRUTH_CHAINS = 10, 12, 13, 14


class ConfigInvalid(ConfigError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_routes: int = 3
    stops_per_route: int = 6
    trips_per_route_per_day: int = 8
    days: int = 28
    start_date: str = '2024-01-01'
    hub_centered: bool = True
    center: Tuple[float, float] = (36.16, -86.78)
    stop_spacing_miles: float = 0.6
    service_speed_mph: float = 12.0
    dwell_s: int = 30
    layover_s: int = 300
    first_departure_s: int = 21600
    headway_s: int = 3600
    bus_capacity: int = 40
    agency_substitutes: int = 0

    base_disruption_logit: float = -3.0
    # 'feature=level' for categoricals, bare feature name for a per-unit numeric effect
    feature_effects: Dict[str, float] = field(default_factory=dict)
    temperature_mean_f: float = 60.0
    temperature_amplitude_f: float = 20.0
    rain_probability: float = 0.3
    rain_mean_in_hr: float = 0.1

    base_boarding_mean: float = 2.0
    peak_multiplier: float = 2.0
    # sd of the log of a per-trip demand multiplier; 0 makes every trip of a window alike
    demand_spread: float = 0.5
    hotspot_probability: float = 0.0
    hotspot_boarding_mean: float = 50.0

    truth_chains: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(self.center))
        object.__setattr__(self, 'feature_effects', dict(self.feature_effects))
        problems = []
        for name in ('n_routes', 'stops_per_route', 'trips_per_route_per_day', 'days', 'bus_capacity',
                     'headway_s', 'truth_chains'):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        for name in ('stop_spacing_miles', 'service_speed_mph'):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be > 0")
        for name in ('dwell_s', 'layover_s', 'agency_substitutes', 'base_boarding_mean',
                     'peak_multiplier', 'demand_spread', 'hotspot_boarding_mean', 'rain_mean_in_hr'):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        for name in ('hotspot_probability', 'rain_probability'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must lie in [0, 1]")
        if not math.isfinite(self.base_disruption_logit):
            problems.append("base_disruption_logit must be finite (use -50 to switch disruptions off)")
        for key in self.feature_effects:
            if not _known_effect(key):
                problems.append(f"unknown feature effect {key!r}")
        if self.first_departure_s < 4 * 3600:
            problems.append("first_departure_s must not be before 4AM")
        if self.last_arrival_s() >= 86400:
            problems.append("the last trip would run past midnight")
        try:
            isoparse(self.start_date)
        except ValueError:
            problems.append(f"start_date {self.start_date!r} is not an ISO date")
        if problems:
            raise ConfigInvalid(f"Invalid generator config: {problems}")

    @classmethod
    def from_dict(cls, values: Dict) -> 'GeneratorConfig':
        try:
            return from_mapping(cls, values or {})
        except ConfigInvalid:
            raise
        except (ConfigError, TypeError) as e:
            raise ConfigInvalid(str(e)) from e

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def stops_per_trip(self) -> int:
        return self.stops_per_route + (1 if self.hub_centered else 0)

    @property
    def segment_s(self) -> int:
        return int(round(self.stop_spacing_miles / self.service_speed_mph * 3600))

    def trip_duration_s(self) -> int:
        n = self.stops_per_trip
        return (n - 1) * (self.segment_s + self.dwell_s)

    def last_arrival_s(self) -> int:
        last_out = self.first_departure_s + (self.trips_per_route_per_day - 1) * self.headway_s
        return last_out + 2 * self.trip_duration_s() + self.layover_s

    def vehicles_per_route(self) -> int:
        cycle = 2 * (self.trip_duration_s() + self.layover_s)
        return max(1, math.ceil(cycle / self.headway_s))

    def service_dates(self) -> List[date]:
        """History days followed by one held-out target day"""
        first = isoparse(self.start_date).date()
        return [first + timedelta(days=d) for d in range(self.days + 1)]


def _known_effect(key: str) -> bool:
    feature, sep, _ = key.partition('=')
    if sep:
        return feature in {f.value for f in CategoricalFeature}
    return key in {f.value for f in NumericalFeature}


def _offset(center: Tuple[float, float], miles: float, angle: float) -> Tuple[float, float]:
    lat0, lon0 = center
    lat = lat0 + miles * math.cos(angle) / MILES_PER_DEGREE_LAT
    lon = lon0 + miles * math.sin(angle) / (MILES_PER_DEGREE_LAT * math.cos(math.radians(lat0)))
    return round(lat, 6), round(lon, 6)


def _stop_times(stop_ids: List[str], start: int, cfg: GeneratorConfig) -> Tuple[StopTime, ...]:
    times = []
    arrival = start
    for stop_id in stop_ids:
        times.append(StopTime(stop_id, arrival, arrival + cfg.dwell_s))
        arrival += cfg.dwell_s + cfg.segment_s
    return tuple(times)


def generate_network(cfg: GeneratorConfig) -> Schedule:
    """Spoke-hub network: one radial route per spoke, every day of the config"""
    stops = {HUB_ID: Stop(HUB_ID, 'Central hub', *cfg.center)}
    depot_angle = math.pi / cfg.n_routes
    stops[DEPOT_ID] = Stop(DEPOT_ID, 'Main garage', *_offset(cfg.center, 1.0, depot_angle))

    route_stops: Dict[str, List[str]] = {}
    candidates = [HUB_ID]
    for r in range(cfg.n_routes):
        angle = 2 * math.pi * r / cfg.n_routes
        route_id = f"R{r}"
        ids = []
        for i in range(1, cfg.stops_per_route + 1):
            stop_id = f"{route_id}S{i}"
            stops[stop_id] = Stop(stop_id, f"Route {r} stop {i}", *_offset(cfg.center, i * cfg.stop_spacing_miles, angle))
            ids.append(stop_id)
        route_stops[route_id] = ([HUB_ID] if cfg.hub_centered else []) + ids
        if len(candidates) < MAX_CANDIDATES:
            candidates.append(ids[(len(ids) - 1) // 2])

    route_directions = tuple(sorted(RouteDirection(route_id, d) for route_id in route_stops for d in Direction))
    vehicles = cfg.vehicles_per_route()
    trips: Dict[str, Trip] = {}
    for service_date in cfg.service_dates():
        for route_id, outbound_stops in route_stops.items():
            for j in range(cfg.trips_per_route_per_day):
                vehicle = f"{route_id}V{j % vehicles}"
                block = f"{route_id}B{j % vehicles}"
                start = cfg.first_departure_s + j * cfg.headway_s
                back = start + cfg.trip_duration_s() + cfg.layover_s
                for direction, sequence, begin in ((Direction.OUTBOUND, outbound_stops, start),
                                                   (Direction.INBOUND, outbound_stops[::-1], back)):
                    trip_id = f"{service_date:%Y%m%d}-{route_id}-{direction.value[:3]}-{j:02d}"
                    trips[trip_id] = Trip(trip_id, RouteDirection(route_id, direction),
                                          _stop_times(sequence, begin, cfg), service_date, vehicle, block)

    agency = tuple(candidates[:cfg.agency_substitutes]) if cfg.agency_substitutes else None
    schedule = Schedule(
        stops=stops, route_directions=route_directions, trips=trips, depot=DEPOT_ID, hub=HUB_ID,
        candidate_stationing_stops=tuple(candidates), bus_capacity=cfg.bus_capacity, agency_plan=agency,
    )
    return schedule.validate()


@dataclass(frozen=True)
class GroundTruth:
    """The logistic process the labels were drawn from"""

    base_logit: float
    effects: Dict[str, float]

    def logit(self, features: TripFeatures) -> float:
        value = self.base_logit
        for feature in ALL_CATEGORICALS:
            value += self.effects.get(f"{feature.value}={features.level(feature)}", 0.0)
        for feature in NumericalFeature:
            value += self.effects.get(feature.value, 0.0) * features.value(feature)
        return value

    def probability(self, features: TripFeatures) -> float:
        return float(sigmoid(np.array([self.logit(features)]))[0])

    def to_dict(self) -> Dict:
        return {'base_logit': self.base_logit, 'effects': dict(sorted(self.effects.items()))}


def write_ground_truth(truth: GroundTruth, path: str) -> str:
    document = truth.to_dict()
    validate_artifact(document, 'ground_truth')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
    return path


def daily_weather(cfg: GeneratorConfig, service_date: date) -> Tuple[float, float]:
    """(precipitation in/hr, temperature F) shared by every trip of a day"""
    rng = substream(cfg.seed, _WEATHER, service_date.toordinal())
    season = math.sin(2 * math.pi * (service_date.timetuple().tm_yday - 105) / 365.0)
    temperature = cfg.temperature_mean_f + cfg.temperature_amplitude_f * season + float(rng.normal(0.0, 5.0))
    precipitation = float(rng.exponential(cfg.rain_mean_in_hr)) if rng.random() < cfg.rain_probability else 0.0
    return round(precipitation, 4), round(temperature, 2)


def peak_expected_load(trip: Trip, ridership: RidershipParams) -> float:
    """Largest mean onboard count along the trip"""
    load, peak = 0.0, 0.0
    for stop_id in dict.fromkeys(st.stop_id for st in trip.stop_times):
        load -= ridership.alighting.get((trip.trip_id, stop_id), 0.0)
        load += ridership.boarding.get((trip.trip_id, stop_id), 0.0)
        peak = max(peak, load)
    return peak


def generate_trip_context(cfg: GeneratorConfig, schedule: Schedule,
                          ridership: Optional[RidershipParams] = None) -> Dict[str, TripContext]:
    """Weather of the trip's day and the occupancy bucket of its peak expected load"""
    ridership = ridership or generate_ridership_params(cfg, schedule)
    weather = {d: daily_weather(cfg, d) for d in schedule.service_dates()}
    context = {}
    for trip_id in sorted(schedule.trips, key=lambda t: (schedule.trips[t].service_date, t)):
        trip = schedule.trips[trip_id]
        precipitation, temperature = weather[trip.service_date]
        category = ridership_category_for(peak_expected_load(trip, ridership), cfg.bus_capacity)
        context[trip_id] = TripContext(category, precipitation, temperature)
    return context


@dataclass
class LabeledHistory:
    trips: List[LabeledTrip]
    ground_truth: GroundTruth
    context: Dict[str, TripContext]


def generate_labeled_history(cfg: GeneratorConfig, schedule: Schedule,
                             context: Optional[Dict[str, TripContext]] = None) -> LabeledHistory:
    """Label every trip before the target day by a Bernoulli draw from the ground truth"""
    truth = GroundTruth(cfg.base_disruption_logit, dict(cfg.feature_effects))
    context = context or generate_trip_context(cfg, schedule)
    target_day = max(schedule.service_dates()) if len(schedule.service_dates()) > 1 else None
    rng = substream(cfg.seed, _LABELS)
    rows = []
    for trip_id in sorted(schedule.trips, key=lambda t: (schedule.trips[t].service_date, t)):
        trip = schedule.trips[trip_id]
        if trip.service_date == target_day:
            continue
        features = trip_features(trip, context[trip_id])
        label = int(rng.random() < truth.probability(features))
        rows.append(LabeledTrip(features, label, trip_id))
    positives = sum(r.label for r in rows)
    logger.info(f"Generated {len(rows)} labeled trips, {positives} disruptions "
                f"({positives / max(len(rows), 1):.2%})")
    return LabeledHistory(rows, truth, context)


def true_disruption_probs(truth: GroundTruth, schedule: Schedule, context: Dict[str, TripContext]) -> Dict[str, float]:
    return {trip_id: truth.probability(trip_features(trip, context[trip_id]))
            for trip_id, trip in sorted(schedule.trips.items())}


def _alighting_means(boarding: List[float]) -> List[float]:
    # each rider leaves at a uniformly chosen later stop
    n = len(boarding)
    return [sum(boarding[j] / (n - 1 - j) for j in range(i) if n - 1 - j > 0) for i in range(n)]


def generate_ridership_params(cfg: GeneratorConfig, schedule: Schedule) -> RidershipParams:
    """Mean boarding/alighting per (trip, stop) with morning and afternoon peaks.

    Each trip scales its window's rate by a lognormal demand multiplier, and with
    ``hotspot_probability`` one stop boards ``hotspot_boarding_mean`` instead.
    """
    rng = substream(cfg.seed, _RIDERSHIP)
    peaks = (ServiceWindow.MORNING, ServiceWindow.AFTERNOON)
    boarding_means: Dict[Tuple[str, str], float] = {}
    alighting_means: Dict[Tuple[str, str], float] = {}
    for trip_id in sorted(schedule.trips):
        trip = schedule.trips[trip_id]
        stop_ids = list(dict.fromkeys(st.stop_id for st in trip.stop_times))
        n = len(stop_ids)
        window = trip_features(trip, TripContext(RidershipCategory.LOW, 0.0, 0.0)).service_window
        rate = cfg.base_boarding_mean * (cfg.peak_multiplier if window in peaks else 1.0)
        rate *= math.exp(float(rng.normal(0.0, cfg.demand_spread)))
        boarding = [rate if i < n - 1 else 0.0 for i in range(n)]
        if n > 1 and rng.random() < cfg.hotspot_probability:
            boarding[int(rng.integers(n - 1))] = cfg.hotspot_boarding_mean
        alighting = _alighting_means(boarding)
        for stop_id, on, off in zip(stop_ids, boarding, alighting):
            if on > 0:
                boarding_means[(trip_id, stop_id)] = on
            if off > 0:
                alighting_means[(trip_id, stop_id)] = off
    return RidershipParams(boarding_means, alighting_means)


@dataclass
class Corpus:
    schedule: Schedule
    history: LabeledHistory
    ridership: RidershipParams
    target_day: date
    files: List[str] = field(default_factory=list)


def write_corpus(cfg: GeneratorConfig, out_dir: str) -> Corpus:
    """Write network, history, context, ridership, ground truth and truth chains"""
    os.makedirs(out_dir, exist_ok=True)
    schedule = generate_network(cfg)
    ridership = generate_ridership_params(cfg, schedule)
    history = generate_labeled_history(cfg, schedule, generate_trip_context(cfg, schedule, ridership))
    target_day = max(schedule.service_dates())

    save_schedule(schedule, out_dir)
    files = [os.path.join(out_dir, name) for name in
             ('stops.csv', 'route_directions.csv', 'trips.csv', 'stop_times.csv', 'network.json')]
    files.append(write_labeled_trips(history.trips, os.path.join(out_dir, 'labeled_trips.csv')))
    files.append(write_trip_context(history.context, os.path.join(out_dir, 'trip_context.csv')))
    files.append(write_ridership_params(ridership, os.path.join(out_dir, 'ridership.csv')))
    files.append(write_ground_truth(history.ground_truth, os.path.join(out_dir, 'ground_truth.json')))

    # held-out scenarios of the target day drawn from the true process
    day = schedule.for_service_date(target_day)
    probs = true_disruption_probs(history.ground_truth, day, history.context)
    chain_dir = os.path.join(out_dir, 'truth_chains')
    os.makedirs(chain_dir, exist_ok=True)
    for chain in sample_chains(day, probs, ridership, cfg.truth_chains, derive_seed(cfg.seed, _TRUTH_CHAINS)):
        files.append(write_chain(chain, os.path.join(chain_dir, f"chain_{chain.chain_id:04d}.json")))

    logger.info(f"Corpus written to {out_dir}: {len(schedule.trips)} trips over "
                f"{len(schedule.service_dates())} days, target day {target_day.isoformat()}")
    return Corpus(schedule, history, ridership, target_day, files)
