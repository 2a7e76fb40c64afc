# transit_data/loader.py
import json
import logging
import math
import os
from typing import Dict, List, Tuple

import pandas as pd
from dateutil import parser as date_parser

from transit_data.schedule import (
    DanglingReference, Direction, RouteDirection, Schedule, Stop, StopTime, Trip,
)
from utils.errors import DataError

logger = logging.getLogger(__name__)

EARTH_RADIUS_MILES = 3958.7613

STOPS_FILE = 'stops.csv'
ROUTE_DIRECTIONS_FILE = 'route_directions.csv'
TRIPS_FILE = 'trips.csv'
STOP_TIMES_FILE = 'stop_times.csv'
NETWORK_FILE = 'network.json'

COLUMNS = {
    STOPS_FILE: ['stop_id', 'name', 'lat', 'lon'],
    ROUTE_DIRECTIONS_FILE: ['route_id', 'direction'],
    TRIPS_FILE: ['trip_id', 'route_id', 'direction', 'service_date', 'vehicle_id', 'block_id'],
    STOP_TIMES_FILE: ['trip_id', 'seq', 'stop_id', 'arrival_s', 'departure_s'],
}


class MissingFile(DataError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"Missing file: {path}")


class MalformedRow(DataError):
    def __init__(self, file: str, line: int, reason: str):
        self.file, self.line, self.reason = file, line, reason
        super().__init__(f"{file}:{line}: {reason}")


def _read_table(dir_path: str, name: str) -> pd.DataFrame:
    path = os.path.join(dir_path, name)
    if not os.path.exists(path):
        raise MissingFile(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedRow(name, 0, str(e)) from e
    if list(frame.columns) != COLUMNS[name]:
        raise MalformedRow(name, 1, f"expected header {','.join(COLUMNS[name])}")
    return frame


def _parse(file: str, line: int, column: str, value: str, cast):
    try:
        return cast(value)
    except (TypeError, ValueError, OverflowError):
        raise MalformedRow(file, line, f"bad {column} value {value!r}") from None


def _direction(file: str, line: int, value: str) -> Direction:
    return _parse(file, line, 'direction', value.strip().lower(), Direction)


def load_schedule(dir_path: str) -> Schedule:
    """Load and validate a schedule directory"""
    network_path = os.path.join(dir_path, NETWORK_FILE)
    if not os.path.exists(network_path):
        raise MissingFile(network_path)
    frames = {name: _read_table(dir_path, name) for name in COLUMNS}

    stops: Dict[str, Stop] = {}
    for i, row in enumerate(frames[STOPS_FILE].itertuples(index=False), start=2):
        if row.stop_id in stops:
            raise MalformedRow(STOPS_FILE, i, f"duplicate stop_id {row.stop_id!r}")
        try:
            stops[row.stop_id] = Stop(
                row.stop_id, row.name,
                _parse(STOPS_FILE, i, 'lat', row.lat, float),
                _parse(STOPS_FILE, i, 'lon', row.lon, float),
            )
        except DataError as e:
            if isinstance(e, MalformedRow):
                raise
            raise MalformedRow(STOPS_FILE, i, str(e)) from e

    route_directions: List[RouteDirection] = []
    for i, row in enumerate(frames[ROUTE_DIRECTIONS_FILE].itertuples(index=False), start=2):
        route_directions.append(RouteDirection(row.route_id, _direction(ROUTE_DIRECTIONS_FILE, i, row.direction)))
    known_rd = set(route_directions)

    stop_times: Dict[str, List[Tuple[int, StopTime]]] = {}
    for i, row in enumerate(frames[STOP_TIMES_FILE].itertuples(index=False), start=2):
        seq = _parse(STOP_TIMES_FILE, i, 'seq', row.seq, int)
        arrival = _parse(STOP_TIMES_FILE, i, 'arrival_s', row.arrival_s, int)
        departure = _parse(STOP_TIMES_FILE, i, 'departure_s', row.departure_s, int)
        if not 0 <= arrival <= 86400 or not 0 <= departure <= 86400:
            raise MalformedRow(STOP_TIMES_FILE, i, "times must lie within the service day [0, 86400]")
        if row.stop_id not in stops:
            raise DanglingReference(row.stop_id, f"{STOP_TIMES_FILE}:{i}")
        stop_times.setdefault(row.trip_id, []).append((seq, StopTime(row.stop_id, arrival, departure)))

    trips: Dict[str, Trip] = {}
    for i, row in enumerate(frames[TRIPS_FILE].itertuples(index=False), start=2):
        if row.trip_id in trips:
            raise MalformedRow(TRIPS_FILE, i, f"duplicate trip_id {row.trip_id!r}")
        rd = RouteDirection(row.route_id, _direction(TRIPS_FILE, i, row.direction))
        if rd not in known_rd:
            raise DanglingReference(rd.label, f"{TRIPS_FILE}:{i}")
        service_date = _parse(TRIPS_FILE, i, 'service_date', row.service_date,
                              lambda v: date_parser.isoparse(v).date())
        ordered = sorted(stop_times.pop(row.trip_id, []), key=lambda p: p[0])
        if [seq for seq, _ in ordered] != list(range(len(ordered))):
            raise MalformedRow(STOP_TIMES_FILE, 0, f"trip {row.trip_id!r} seq must be 0..n-1")
        trip = Trip(row.trip_id, rd, tuple(st for _, st in ordered), service_date, row.vehicle_id, row.block_id)
        trip.validate()
        trips[row.trip_id] = trip
    if stop_times:
        raise DanglingReference(sorted(stop_times)[0], STOP_TIMES_FILE)

    try:
        with open(network_path, 'r', encoding='utf-8') as f:
            network = json.load(f)
    except json.JSONDecodeError as e:
        raise MalformedRow(NETWORK_FILE, e.lineno, e.msg) from e
    missing = [key for key in ('depot', 'hub', 'candidate_stops') if key not in network]
    if missing:
        raise MalformedRow(NETWORK_FILE, 0, f"missing keys {missing}")

    agency_plan = network.get('agency_plan')
    schedule = Schedule(
        stops=stops,
        route_directions=tuple(route_directions),
        trips=trips,
        depot=network['depot'],
        hub=network['hub'],
        candidate_stationing_stops=tuple(network['candidate_stops']),
        bus_capacity=int(network.get('bus_capacity', 40)),
        detour_factor=float(network.get('detour_factor', 1.3)),
        speed_mph=float(network.get('speed_mph', 20.0)),
        agency_plan=tuple(agency_plan) if agency_plan is not None else None,
    ).validate()

    logger.info(f"Loaded schedule from {dir_path}: {len(stops)} stops, "
                f"{len(route_directions)} route-directions, {len(trips)} trips")
    return schedule


def save_schedule(schedule: Schedule, dir_path: str) -> str:
    """Write the five schedule files; the inverse of load_schedule"""
    os.makedirs(dir_path, exist_ok=True)

    pd.DataFrame(
        [(s.stop_id, s.name, repr(s.lat), repr(s.lon)) for s in schedule.stops.values()],
        columns=COLUMNS[STOPS_FILE],
    ).to_csv(os.path.join(dir_path, STOPS_FILE), index=False, lineterminator='\n')

    pd.DataFrame(
        [(rd.route_id, rd.direction.value) for rd in schedule.route_directions],
        columns=COLUMNS[ROUTE_DIRECTIONS_FILE],
    ).to_csv(os.path.join(dir_path, ROUTE_DIRECTIONS_FILE), index=False, lineterminator='\n')

    trips = sorted(schedule.trips.values(), key=lambda t: t.trip_id)
    pd.DataFrame(
        [(t.trip_id, t.route_direction.route_id, t.route_direction.direction.value,
          t.service_date.isoformat(), t.vehicle_id, t.block_id) for t in trips],
        columns=COLUMNS[TRIPS_FILE],
    ).to_csv(os.path.join(dir_path, TRIPS_FILE), index=False, lineterminator='\n')

    pd.DataFrame(
        [(t.trip_id, seq, st.stop_id, st.arrival_s, st.departure_s)
         for t in trips for seq, st in enumerate(t.stop_times)],
        columns=COLUMNS[STOP_TIMES_FILE],
    ).to_csv(os.path.join(dir_path, STOP_TIMES_FILE), index=False, lineterminator='\n')

    network = {
        'depot': schedule.depot,
        'hub': schedule.hub,
        'candidate_stops': list(schedule.candidate_stationing_stops),
        'detour_factor': schedule.detour_factor,
        'speed_mph': schedule.speed_mph,
        'bus_capacity': schedule.bus_capacity,
    }
    if schedule.agency_plan is not None:
        network['agency_plan'] = list(schedule.agency_plan)
    with open(os.path.join(dir_path, NETWORK_FILE), 'w', encoding='utf-8', newline='\n') as f:
        json.dump(network, f, indent=2)

    logger.info(f"Saved schedule with {len(trips)} trips to {dir_path}")
    return dir_path


def haversine_miles(a: Stop, b: Stop) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def travel_time_and_distance(schedule: Schedule, from_stop: str, to_stop: str) -> Tuple[float, float]:
    """Deadhead (minutes, miles) between two stops"""
    a, b = schedule.stop(from_stop), schedule.stop(to_stop)
    if from_stop == to_stop:
        return 0.0, 0.0
    # order the pair so the result is bit-symmetric
    if from_stop > to_stop:
        a, b = b, a
    miles = haversine_miles(a, b) * schedule.detour_factor
    return miles / schedule.speed_mph * 60.0, miles
