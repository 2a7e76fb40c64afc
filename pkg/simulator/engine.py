# simulator/engine.py
"""Discrete-event simulation of one service day with substitute-bus dispatch.

Regular buses run their scheduled trips exactly on time. Passenger groups
arrive up to ``arrival_window_s`` before their bus, wait at most
``patience_s`` and board any bus whose (block, route, direction) key matches
theirs while there is room. Stranded passengers raise an overage; a failing
bus raises a disruption. Both may pull the nearest free substitute off its
station.
"""
import heapq
import itertools
import json
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from config.settings import PolicyConfig
from simulator.chains import Chain
from simulator.costs import CostBreakdown
from simulator.dispatch import (
    DISPATCHABLE, BusState, DispatchRequest, EventType, Leg, ServicePlan, SubstituteBus,
    build_fleet, cover_disruption, cover_overage, dispatch_decision,
)
from stationing.plans import StationingPlan
from transit_data.schedule import Schedule, Trip
from utils.errors import DataError, InvariantViolation
from utils.seeding import substream

logger = logging.getLogger(__name__)


class EventKind(IntEnum):
    """Event variants; the value is the tiebreak rank at equal timestamps"""

    PASSENGER_ARRIVAL = 0
    BUS_ARRIVAL_AT_STOP = 1
    SUBSTITUTE_ARRIVED = 2
    DISRUPTION_OCCURRED = 3
    OVERAGE_DETECTED = 4
    DAY_END = 5

    @property
    def label(self) -> str:
        return ''.join(word.capitalize() for word in self.name.split('_'))


KIND_LABELS = {kind.label for kind in EventKind}


class Event(NamedTuple):
    time: float
    kind: EventKind
    entity: str
    payload: Any = None


class EventQueue:
    """Min-heap on (time, rank, entity, insertion counter)"""

    def __init__(self):
        self._heap: List[Tuple] = []
        self._counter = itertools.count()
        self.now: Optional[float] = None

    def push(self, time: float, kind: EventKind, entity: str, payload: Any = None):
        if self.now is not None and time < self.now:
            raise InvariantViolation(f"{kind.label} for {entity} scheduled at {time} before current time {self.now}")
        heapq.heappush(self._heap, (float(time), int(kind), entity, next(self._counter), payload))

    def pop(self) -> Event:
        time, rank, entity, _, payload = heapq.heappop(self._heap)
        self.now = time
        return Event(time, EventKind(rank), entity, payload)

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class PassengerGroup:
    group_id: int
    origin: str
    destination: str
    key: Tuple[str, str, str]
    size: int
    arrival_time: float
    patience_deadline: float


@dataclass
class ActiveBus:
    """A vehicle in service: a regular bus or a covering substitute"""

    bus_id: str
    legs: List[Leg]
    substitute: bool = False
    leg_index: int = 0
    seq: int = 0
    delay: float = 0.0
    onboard: List[PassengerGroup] = field(default_factory=list)

    @property
    def trip(self) -> Trip:
        return self.legs[self.leg_index].trip

    @property
    def load(self) -> int:
        return sum(g.size for g in self.onboard)


@dataclass
class BusLedger:
    boarded: int = 0
    alighted: int = 0
    unloaded: int = 0


@dataclass
class DayStats:
    """Passenger accounting used by the conservation checks"""

    arrivals: int = 0
    served: int = 0
    left_behind: int = 0
    dispatches: int = 0
    uncovered_disruptions: int = 0
    per_bus: Dict[str, BusLedger] = field(default_factory=dict)

    def ledger(self, bus_id: str) -> BusLedger:
        return self.per_bus.setdefault(bus_id, BusLedger())

    def check_conservation(self):
        if self.arrivals != self.served + self.left_behind:
            raise InvariantViolation(
                f"{self.arrivals} arrivals but {self.served} served + {self.left_behind} left behind")
        for bus_id, ledger in self.per_bus.items():
            if ledger.boarded != ledger.alighted + ledger.unloaded:
                raise InvariantViolation(f"{bus_id}: boarded {ledger.boarded} != alighted "
                                         f"{ledger.alighted} + unloaded {ledger.unloaded}")


class TraceRecord(NamedTuple):
    t: float
    kind: str
    entity: str
    stop: Optional[str]
    detail: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {'t': self.t, 'kind': self.kind, 'entity': self.entity, 'stop': self.stop, 'detail': self.detail}


@dataclass
class SimulationResult:
    cost: CostBreakdown
    trace: List[TraceRecord]
    stats: DayStats
    fleet: Dict[str, SubstituteBus]


def horizon_trips(schedule: Schedule, horizon: Tuple[float, float]) -> List[Trip]:
    """Trips starting inside the horizon, ordered by trip id"""
    start, end = horizon
    return [schedule.trips[t] for t in sorted(schedule.trips) if start <= schedule.trips[t].start_s <= end]


def build_passenger_groups(trips: Sequence[Trip], chain: Chain, policy: PolicyConfig, rng) -> List[PassengerGroup]:
    """Split each trip's counts into origin-destination groups, first on first off"""
    groups: List[PassengerGroup] = []
    for trip in trips:
        riding = deque()
        seen = set()
        for st in trip.stop_times:
            if st.stop_id in seen:
                continue
            seen.add(st.stop_id)
            off = chain.alighting.get((trip.trip_id, st.stop_id), 0)
            while off > 0 and riding:
                origin, scheduled, waiting = riding[0]
                take = min(waiting, off)
                groups.append(PassengerGroup(len(groups), origin, st.stop_id, trip.eligibility_key,
                                             take, float(scheduled), 0.0))
                off -= take
                if take == waiting:
                    riding.popleft()
                else:
                    riding[0] = (origin, scheduled, waiting - take)
            on = chain.boarding.get((trip.trip_id, st.stop_id), 0)
            if on:
                riding.append((st.stop_id, st.arrival_s, on))
        if riding:
            raise InvariantViolation(f"chain {chain.chain_id}: riders of {trip.trip_id!r} never alight")

    for group in groups:
        early = float(rng.uniform(0.0, policy.arrival_window_s)) if policy.arrival_window_s > 0 else 0.0
        group.arrival_time -= early
        group.patience_deadline = group.arrival_time + policy.patience_s
    return groups


class DaySimulator:
    """Single-use event loop for one (schedule, chain, plan, seed)"""

    def __init__(self, schedule: Schedule, chain: Chain, plan: StationingPlan, policy: PolicyConfig, rng_seed: int):
        self.schedule = schedule
        self.chain = chain
        self.plan = plan
        self.policy = policy
        self.capacity = policy.bus_capacity or schedule.bus_capacity
        self.arrival_rng = substream(rng_seed, 0)
        self.dispatch_rng = substream(rng_seed, 1)

        self.queue = EventQueue()
        self.trace: List[TraceRecord] = []
        self.stats = DayStats()
        self.waiting: Dict[str, List[PassengerGroup]] = {}
        self.left_behind: Dict[str, int] = {}
        self.active: Dict[str, ActiveBus] = {}
        self.pending: Dict[str, ServicePlan] = {}
        self.fleet = build_fleet(plan.assignments, schedule.depot)
        self.next_group_id = 0

        self.trips = horizon_trips(schedule, policy.horizon)

    def _record(self, event: Event, stop: Optional[str], **detail):
        self.trace.append(TraceRecord(event.time, event.kind.label, event.entity, stop, detail))

    def _leave_behind(self, stop_id: str, count: int):
        if count:
            self.left_behind[stop_id] = self.left_behind.get(stop_id, 0) + count
            self.stats.left_behind += count

    def _expire(self, stop_id: str, now: float):
        queue = self.waiting.get(stop_id, [])
        expired = [g for g in queue if g.patience_deadline < now]
        if expired:
            self.waiting[stop_id] = [g for g in queue if g.patience_deadline >= now]
            self._leave_behind(stop_id, sum(g.size for g in expired))

    def _schedule_vehicles(self) -> float:
        first = None
        in_horizon = {t.trip_id for t in self.trips}
        for vehicle_id in sorted({t.vehicle_id for t in self.trips}):
            trips = [t for t in self.schedule.trips_for_vehicle(vehicle_id) if t.trip_id in in_horizon]
            bus = ActiveBus(vehicle_id, [Leg(t) for t in trips])
            self.active[vehicle_id] = bus
            start = float(trips[0].start_s)
            self.queue.push(start, EventKind.BUS_ARRIVAL_AT_STOP, vehicle_id)
            first = start if first is None else min(first, start)
        return first

    def _schedule_passengers(self) -> Optional[float]:
        groups = build_passenger_groups(self.trips, self.chain, self.policy, self.arrival_rng)
        for group in groups:
            self.stats.arrivals += group.size
            self.queue.push(group.arrival_time, EventKind.PASSENGER_ARRIVAL, f"g{group.group_id:07d}", group)
        self.next_group_id = len(groups)
        return min((g.arrival_time for g in groups), default=None)

    def _station_fleet(self, start: float):
        for bus_id in sorted(self.fleet):
            sub = self.fleet[bus_id]
            sub.move_to(BusState.TRAVELING_TO_STATION)
            sub.deadhead(self.schedule, sub.station)
            # substitutes leave the depot early enough to be in place when service starts
            self.queue.push(start, EventKind.SUBSTITUTE_ARRIVED, bus_id, None)

    def run(self) -> SimulationResult:
        self.plan.validate(self.schedule)
        starts = [t for t in (self._schedule_vehicles(), self._schedule_passengers()) if t is not None]
        start = min(starts) if starts else float(self.policy.horizon[0])
        self._station_fleet(start)

        handlers = {
            EventKind.PASSENGER_ARRIVAL: self._on_passenger_arrival,
            EventKind.BUS_ARRIVAL_AT_STOP: self._on_bus_arrival,
            EventKind.SUBSTITUTE_ARRIVED: self._on_substitute_arrived,
            EventKind.DISRUPTION_OCCURRED: self._on_disruption,
            EventKind.OVERAGE_DETECTED: self._on_overage,
            EventKind.DAY_END: self._on_day_end,
        }
        ended = not self.queue
        if ended:
            self.queue.push(start, EventKind.DAY_END, 'day')
        while self.queue:
            event = self.queue.pop()
            handlers[event.kind](event)
            if not self.queue and not ended:
                ended = True
                self.queue.push(event.time, EventKind.DAY_END, 'day')

        self.stats.check_conservation()
        cost = CostBreakdown(
            deadhead_miles=sum(self.fleet[b].deadhead_miles for b in sorted(self.fleet)),
            deadhead_minutes=sum(self.fleet[b].deadhead_minutes for b in sorted(self.fleet)),
            left_behind_per_stop=dict(sorted(self.left_behind.items())),
            weights=self.policy.cost_weights,
        )
        logger.debug(f"chain {self.chain.chain_id}: {len(self.trace)} events, {self.stats.dispatches} dispatches, "
                     f"cost {cost.total():.3f}")
        return SimulationResult(cost, self.trace, self.stats, self.fleet)

    def _on_passenger_arrival(self, event: Event):
        group: PassengerGroup = event.payload
        self.waiting.setdefault(group.origin, []).append(group)
        self._record(event, group.origin, size=group.size, destination=group.destination)

    def _on_bus_arrival(self, event: Event):
        bus = self.active[event.entity]
        trip = bus.trip
        stop_time = trip.stop_times[bus.seq]
        stop_id = stop_time.stop_id
        last = bus.seq == len(trip.stop_times) - 1
        ledger = self.stats.ledger(bus.bus_id)

        staying = [g for g in bus.onboard if not last and g.destination != stop_id]
        alighted = bus.load - sum(g.size for g in staying)
        bus.onboard = staying
        ledger.alighted += alighted
        self.stats.served += alighted

        self._expire(stop_id, event.time)
        boarded, stranded = 0, 0
        if not last:
            remaining = []
            for group in self.waiting.get(stop_id, []):
                if group.key != trip.eligibility_key or group.arrival_time > event.time:
                    remaining.append(group)
                    continue
                room = self.capacity - bus.load
                if group.size <= room:
                    bus.onboard.append(group)
                    boarded += group.size
                    continue
                if room > 0:
                    bus.onboard.append(PassengerGroup(group.group_id, group.origin, group.destination, group.key,
                                                      room, group.arrival_time, group.patience_deadline))
                    group.size -= room
                    boarded += room
                stranded += group.size
                remaining.append(group)
            self.waiting[stop_id] = remaining
        ledger.boarded += boarded

        self._record(event, stop_id, trip=trip.trip_id, seq=bus.seq, alighted=alighted,
                     boarded=boarded, load=bus.load, stranded=stranded)

        if not bus.substitute and self.chain.disruption_seq(trip.trip_id) == bus.seq:
            failure = max(event.time, stop_time.departure_s + bus.delay)
            self.queue.push(failure, EventKind.DISRUPTION_OCCURRED, bus.bus_id, stop_id)
            return
        if stranded:
            self.queue.push(event.time, EventKind.OVERAGE_DETECTED, bus.bus_id,
                            (trip, bus.seq, stop_id, stranded))
        self._advance(bus, event.time)

    def _advance(self, bus: ActiveBus, now: float):
        if bus.seq + 1 < len(bus.trip.stop_times):
            bus.seq += 1
            self.queue.push(bus.trip.stop_times[bus.seq].arrival_s + bus.delay,
                            EventKind.BUS_ARRIVAL_AT_STOP, bus.bus_id)
            return
        bus.leg_index += 1
        if bus.leg_index < len(bus.legs):
            bus.seq = bus.legs[bus.leg_index].from_seq
            scheduled = bus.trip.stop_times[bus.seq].arrival_s
            # moving on to the next trip of the block is in service
            when = max(float(scheduled), now)
            bus.delay = when - scheduled
            self.queue.push(when, EventKind.BUS_ARRIVAL_AT_STOP, bus.bus_id)
            return
        del self.active[bus.bus_id]
        if bus.substitute:
            sub = self.fleet[bus.bus_id]
            sub.move_to(BusState.IDLE)
            sub.location = bus.legs[-1].trip.stop_times[-1].stop_id

    def _dispatch(self, plan: ServicePlan, now: float):
        sub = self.fleet[plan.bus_id]
        sub.move_to(BusState.DISPATCHED)
        minutes = sub.deadhead(self.schedule, plan.target_stop)
        self.pending[sub.bus_id] = plan
        self.stats.dispatches += 1
        self.queue.push(now + minutes * 60.0, EventKind.SUBSTITUTE_ARRIVED, sub.bus_id, plan.target_stop)

    def _on_substitute_arrived(self, event: Event):
        sub = self.fleet[event.entity]
        if sub.state is BusState.TRAVELING_TO_STATION:
            sub.move_to(BusState.STATIONED)
            self._record(event, sub.station, phase='station', deadhead_miles=sub.deadhead_miles)
            return
        plan = self.pending.pop(sub.bus_id)
        sub.move_to(BusState.COVERING)
        self._record(event, plan.target_stop, phase='cover', trips=[leg.trip.trip_id for leg in plan.legs],
                     deadhead_miles=sub.deadhead_miles)
        bus = ActiveBus(sub.bus_id, list(plan.legs), substitute=True, seq=plan.legs[0].from_seq)
        scheduled = bus.trip.stop_times[bus.seq].arrival_s
        when = max(float(scheduled), event.time)
        bus.delay = when - scheduled
        self.active[sub.bus_id] = bus
        self.queue.push(when, EventKind.BUS_ARRIVAL_AT_STOP, sub.bus_id)

    def _on_disruption(self, event: Event):
        bus = self.active.pop(event.entity)
        stop_id = event.payload
        ledger = self.stats.ledger(bus.bus_id)
        unloaded = 0
        for group in bus.onboard:
            unloaded += group.size
            # stranded riders restart their patience at the stop where the bus failed
            self.waiting.setdefault(stop_id, []).append(PassengerGroup(
                group.group_id, stop_id, group.destination, group.key, group.size,
                event.time, event.time + self.policy.patience_s))
        bus.onboard = []
        ledger.unloaded += unloaded

        request = DispatchRequest(EventType.DISRUPTION, stop_id, event.time, capacity=self.capacity)
        sub_id = dispatch_decision(request, self.fleet, self.schedule, self.policy, self.dispatch_rng)
        self._record(event, stop_id, trip=bus.trip.trip_id, seq=bus.seq, unloaded=unloaded, substitute=sub_id)
        if sub_id is None:
            self.stats.uncovered_disruptions += 1
            return
        later = [leg.trip for leg in bus.legs[bus.leg_index + 1:]]
        self._dispatch(cover_disruption(self.fleet[sub_id], bus.trip, bus.seq, later), event.time)

    def _on_overage(self, event: Event):
        trip, seq, stop_id, stranded = event.payload
        request = DispatchRequest(EventType.OVERAGE, stop_id, event.time, left_behind=stranded,
                                  capacity=self.capacity)
        sub_id = dispatch_decision(request, self.fleet, self.schedule, self.policy, self.dispatch_rng)
        self._record(event, stop_id, trip=trip.trip_id, seq=seq, stranded=stranded, substitute=sub_id)
        if sub_id is not None:
            self._dispatch(cover_overage(self.fleet[sub_id], stop_id, trip, seq), event.time)

    def _on_day_end(self, event: Event):
        returned = []
        for bus_id in sorted(self.fleet):
            sub = self.fleet[bus_id]
            if sub.state not in DISPATCHABLE:
                raise InvariantViolation(f"{bus_id} is still {sub.state.value} at day end")
            sub.move_to(BusState.RETURNING_TO_DEPOT)
            sub.deadhead(self.schedule, self.schedule.depot)
            returned.append(bus_id)
        swept = 0
        for stop_id in sorted(self.waiting):
            count = sum(g.size for g in self.waiting[stop_id])
            self._leave_behind(stop_id, count)
            swept += count
        self.waiting = {}
        self._record(event, None, returned=returned, swept=swept)


def simulate_day(
    schedule: Schedule,
    chain: Chain,
    plan: StationingPlan,
    policy: PolicyConfig = None,
    rng_seed: int = 0,
    k: Optional[int] = None,
    check_chain: bool = True,
) -> SimulationResult:
    """Simulate one service day; raises InfeasiblePlan or InconsistentChain on bad inputs"""
    policy = policy or PolicyConfig()
    if len(schedule.service_dates()) > 1:
        raise DataError("simulate_day expects the trips of a single service date")
    plan.validate(schedule, k)
    if check_chain:
        chain.validate(schedule)
    return DaySimulator(schedule, chain, plan, policy, rng_seed).run()


def validate_trace(trace: Sequence[TraceRecord]) -> Sequence[TraceRecord]:
    """Raise InvariantViolation unless timestamps never decrease and the day ends last"""
    previous = None
    for i, record in enumerate(trace):
        if record.kind not in KIND_LABELS:
            raise InvariantViolation(f"trace[{i}]: unknown event kind {record.kind!r}")
        if previous is not None and record.t < previous:
            raise InvariantViolation(f"trace[{i}]: {record.kind} at {record.t} after an event at {previous}")
        previous = record.t
    if trace and trace[-1].kind != EventKind.DAY_END.label:
        raise InvariantViolation("trace does not end with DayEnd")
    return trace


def write_trace(trace: Sequence[TraceRecord], path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in trace:
            f.write(json.dumps(record.to_dict(), sort_keys=True) + '\n')
    return path


def read_trace(path: str) -> List[TraceRecord]:
    if not os.path.exists(path):
        raise DataError(f"Trace file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return [TraceRecord(**json.loads(line)) for line in f if line.strip()]
