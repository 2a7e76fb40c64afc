# simulator/dispatch.py
"""Substitute fleet, the dispatch rule and the coverage work a dispatch creates."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import PolicyConfig
from transit_data.loader import travel_time_and_distance
from transit_data.schedule import Schedule, Trip
from utils.errors import InvariantViolation

logger = logging.getLogger(__name__)

TIE_TOLERANCE_MIN = 1e-9


class BusState(str, Enum):
    AT_DEPOT = 'AtDepot'
    TRAVELING_TO_STATION = 'TravelingToStation'
    STATIONED = 'Stationed'
    DISPATCHED = 'Dispatched'
    COVERING = 'Covering'
    IDLE = 'Idle'
    RETURNING_TO_DEPOT = 'ReturningToDepot'


# a bus that finished covering waits where it stopped (Idle), never back at its station
ALLOWED_TRANSITIONS = {
    BusState.AT_DEPOT: {BusState.TRAVELING_TO_STATION},
    BusState.TRAVELING_TO_STATION: {BusState.STATIONED},
    BusState.STATIONED: {BusState.DISPATCHED, BusState.RETURNING_TO_DEPOT},
    BusState.DISPATCHED: {BusState.COVERING},
    BusState.COVERING: {BusState.IDLE},
    BusState.IDLE: {BusState.DISPATCHED, BusState.RETURNING_TO_DEPOT},
    BusState.RETURNING_TO_DEPOT: set(),
}

DISPATCHABLE = (BusState.STATIONED, BusState.IDLE)


class EventType(str, Enum):
    OVERAGE = 'overage'
    DISRUPTION = 'disruption'


@dataclass
class SubstituteBus:
    bus_id: str
    station: str
    location: str
    state: BusState = BusState.AT_DEPOT
    deadhead_miles: float = 0.0
    deadhead_minutes: float = 0.0

    def move_to(self, state: BusState):
        if state not in ALLOWED_TRANSITIONS[self.state]:
            raise InvariantViolation(f"{self.bus_id}: illegal transition {self.state.value} -> {state.value}")
        self.state = state

    def deadhead(self, schedule: Schedule, to_stop: str) -> float:
        """Drive out of service to ``to_stop``; returns the minutes it takes"""
        minutes, miles = travel_time_and_distance(schedule, self.location, to_stop)
        self.deadhead_minutes += minutes
        self.deadhead_miles += miles
        self.location = to_stop
        return minutes

    @property
    def available(self) -> bool:
        return self.state in DISPATCHABLE


def build_fleet(stations: Sequence[str], depot: str) -> Dict[str, SubstituteBus]:
    return {f"sub{i}": SubstituteBus(f"sub{i}", station, depot) for i, station in enumerate(stations)}


@dataclass(frozen=True)
class DispatchRequest:
    """A live overage or disruption that may call for a substitute"""

    event_type: EventType
    stop_id: str
    time: float
    left_behind: int = 0
    capacity: int = 40


def dispatch_decision(
    request: DispatchRequest,
    fleet: Dict[str, SubstituteBus],
    schedule: Schedule,
    policy: PolicyConfig,
    rng: np.random.Generator,
) -> Optional[str]:
    """Nearest available substitute by travel time, or None"""
    if request.event_type is EventType.OVERAGE:
        threshold = policy.overage_dispatch_fraction * request.capacity
        if request.left_behind <= threshold:
            logger.debug(f"Overage at {request.stop_id}: {request.left_behind} left <= {threshold:g}, no dispatch")
            return None

    times = []
    for bus_id in sorted(fleet):
        bus = fleet[bus_id]
        if bus.available:
            minutes, _ = travel_time_and_distance(schedule, bus.location, request.stop_id)
            times.append((minutes, bus_id))
    if not times:
        logger.debug(f"No substitute available for {request.event_type.value} at {request.stop_id}")
        return None

    best = min(m for m, _ in times)
    nearest = [bus_id for m, bus_id in times if m - best <= TIE_TOLERANCE_MIN]
    if len(nearest) == 1:
        return nearest[0]
    return nearest[int(rng.integers(len(nearest)))]


@dataclass(frozen=True)
class Leg:
    """Serve ``trip`` from stop index ``from_seq`` to its end"""

    trip: Trip
    from_seq: int = 0


@dataclass
class ServicePlan:
    bus_id: str
    target_stop: str
    legs: List[Leg] = field(default_factory=list)

    @property
    def service_stops(self) -> List[Tuple[str, str]]:
        """(trip_id, stop_id) pairs in service order, excluding the deadhead target"""
        stops = []
        for i, leg in enumerate(self.legs):
            start = leg.from_seq + 1 if i == 0 else leg.from_seq
            stops.extend((leg.trip.trip_id, st.stop_id) for st in leg.trip.stop_times[start:])
        return stops


def cover_overage(bus: SubstituteBus, overage_stop: str, reporting_trip: Trip, seq: int) -> ServicePlan:
    """Deadhead to the overage stop, then finish the reporting trip"""
    if reporting_trip.stop_times[seq].stop_id != overage_stop:
        raise InvariantViolation(f"{overage_stop!r} is not stop {seq} of {reporting_trip.trip_id!r}")
    return ServicePlan(bus.bus_id, overage_stop, [Leg(reporting_trip, seq)])


def cover_disruption(bus: SubstituteBus, broken_trip: Trip, seq: int,
                     remaining_block_trips: Sequence[Trip]) -> ServicePlan:
    """Deadhead to the last visited stop, then take over the broken vehicle's work"""
    last_visited = broken_trip.stop_times[seq].stop_id
    legs = [Leg(broken_trip, seq)] + [Leg(trip) for trip in remaining_block_trips]
    return ServicePlan(bus.bus_id, last_visited, legs)
