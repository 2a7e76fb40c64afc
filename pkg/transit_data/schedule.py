# transit_data/schedule.py
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Dict, List, Optional, Tuple

from utils.errors import DataError


class Direction(str, Enum):
    INBOUND = 'inbound'
    OUTBOUND = 'outbound'


class DanglingReference(DataError):
    def __init__(self, ref_id: str, context: str = ''):
        self.ref_id = ref_id
        super().__init__(f"Unresolved reference {ref_id!r}" + (f" in {context}" if context else ''))


class NonMonotoneStopTimes(DataError):
    def __init__(self, trip_id: str, reason: str = 'arrivals not strictly increasing'):
        self.trip_id = trip_id
        super().__init__(f"Trip {trip_id!r}: {reason}")


class UnknownStop(DataError):
    def __init__(self, stop_id: str):
        self.stop_id = stop_id
        super().__init__(f"Unknown stop {stop_id!r}")


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise DataError(f"Stop {self.stop_id!r} has coordinates out of range ({self.lat}, {self.lon})")


@dataclass(frozen=True, order=True)
class RouteDirection:
    route_id: str
    direction: Direction

    @property
    def label(self) -> str:
        return f"{self.route_id}:{self.direction.value}"


@dataclass(frozen=True)
class StopTime:
    stop_id: str
    arrival_s: int
    departure_s: int


@dataclass(frozen=True)
class Trip:
    trip_id: str
    route_direction: RouteDirection
    stop_times: Tuple[StopTime, ...]
    service_date: date
    vehicle_id: str
    block_id: str

    @property
    def start_s(self) -> int:
        return self.stop_times[0].arrival_s

    @property
    def end_s(self) -> int:
        return self.stop_times[-1].arrival_s

    @property
    def eligibility_key(self) -> Tuple[str, str, str]:
        """(block, route, direction): who may board a bus serving this trip"""
        return (self.block_id, self.route_direction.route_id, self.route_direction.direction.value)

    def validate(self):
        if not self.stop_times:
            raise NonMonotoneStopTimes(self.trip_id, 'no stop times')
        previous = None
        for st in self.stop_times:
            if st.departure_s < st.arrival_s:
                raise NonMonotoneStopTimes(self.trip_id, f"departure before arrival at {st.stop_id!r}")
            if previous is not None and st.arrival_s <= previous:
                raise NonMonotoneStopTimes(self.trip_id)
            previous = st.arrival_s


@dataclass(frozen=True)
class Schedule:
    """Static network: stops, route-directions, trips and the stationing candidates"""

    stops: Dict[str, Stop]
    route_directions: Tuple[RouteDirection, ...]
    trips: Dict[str, Trip]
    depot: str
    hub: str
    candidate_stationing_stops: Tuple[str, ...]
    bus_capacity: int = 40
    detour_factor: float = 1.3
    speed_mph: float = 20.0
    agency_plan: Optional[Tuple[str, ...]] = None
    _vehicle_index: Dict[str, Tuple[str, ...]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        index: Dict[str, List[Trip]] = {}
        for trip in self.trips.values():
            index.setdefault(trip.vehicle_id, []).append(trip)
        object.__setattr__(self, '_vehicle_index', {
            vehicle: tuple(t.trip_id for t in sorted(trips, key=lambda t: (t.service_date, t.start_s, t.trip_id)))
            for vehicle, trips in index.items()
        })

    def stop(self, stop_id: str) -> Stop:
        try:
            return self.stops[stop_id]
        except KeyError:
            raise UnknownStop(stop_id) from None

    def trips_for_vehicle(self, vehicle_id: str) -> List[Trip]:
        """Trips of one vehicle in service order"""
        return [self.trips[t] for t in self._vehicle_index.get(vehicle_id, ())]

    def service_dates(self) -> List[date]:
        return sorted({t.service_date for t in self.trips.values()})

    def for_service_date(self, service_date: date) -> 'Schedule':
        """Same network restricted to the trips of one service day"""
        trips = {tid: t for tid, t in self.trips.items() if t.service_date == service_date}
        return self.with_trips(trips)

    def with_trips(self, trips: Dict[str, Trip]) -> 'Schedule':
        return Schedule(
            stops=self.stops, route_directions=self.route_directions, trips=trips,
            depot=self.depot, hub=self.hub,
            candidate_stationing_stops=self.candidate_stationing_stops,
            bus_capacity=self.bus_capacity, detour_factor=self.detour_factor,
            speed_mph=self.speed_mph, agency_plan=self.agency_plan,
        )

    def validate(self):
        """Check every cross-reference invariant; raises a DataError subclass"""
        seen = set()
        for rd in self.route_directions:
            if rd in seen:
                raise DataError(f"Duplicate route-direction {rd.label}")
            seen.add(rd)
        for stop_id, stop in self.stops.items():
            if stop_id != stop.stop_id:
                raise DataError(f"Stop table key {stop_id!r} does not match stop id {stop.stop_id!r}")
        for ref in (self.depot, self.hub, *self.candidate_stationing_stops, *(self.agency_plan or ())):
            if ref not in self.stops:
                raise DanglingReference(ref, 'network.json')
        if len(set(self.candidate_stationing_stops)) != len(self.candidate_stationing_stops):
            raise DataError("candidate_stops contains duplicates")
        if self.bus_capacity < 1:
            raise DataError("bus_capacity must be >= 1")
        if self.detour_factor <= 0 or self.speed_mph <= 0:
            raise DataError("detour_factor and speed_mph must be positive")
        for trip in self.trips.values():
            if trip.route_direction not in seen:
                raise DanglingReference(trip.route_direction.label, f"trip {trip.trip_id}")
            trip.validate()
            for st in trip.stop_times:
                if st.stop_id not in self.stops:
                    raise DanglingReference(st.stop_id, f"trip {trip.trip_id}")
        return self
