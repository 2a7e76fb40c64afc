import numpy as np
import pytest

from config.settings import PolicyConfig
from simulator.dispatch import (
    BusState, DispatchRequest, EventType, SubstituteBus, build_fleet, cover_disruption, cover_overage,
    dispatch_decision,
)
from transit_data.loader import travel_time_and_distance
from utils.errors import InvariantViolation


def stationed(bus_id, stop, state=BusState.STATIONED):
    return SubstituteBus(bus_id, stop, stop, state=state)


class TestSubstituteBus:
    def test_day_lifecycle(self, line_schedule):
        bus = build_fleet(['B'], 'DEPOT')['sub0']
        assert (bus.state, bus.location) == (BusState.AT_DEPOT, 'DEPOT')
        bus.move_to(BusState.TRAVELING_TO_STATION)
        bus.deadhead(line_schedule, 'B')
        bus.move_to(BusState.STATIONED)
        for state in (BusState.DISPATCHED, BusState.COVERING, BusState.IDLE,
                      BusState.DISPATCHED, BusState.COVERING, BusState.IDLE, BusState.RETURNING_TO_DEPOT):
            bus.move_to(state)
        assert bus.deadhead_miles == pytest.approx(travel_time_and_distance(line_schedule, 'DEPOT', 'B')[1])

    @pytest.mark.parametrize('start, target', [
        (BusState.AT_DEPOT, BusState.STATIONED),
        (BusState.COVERING, BusState.STATIONED),
        (BusState.IDLE, BusState.COVERING),
        (BusState.RETURNING_TO_DEPOT, BusState.STATIONED),
    ])
    def test_illegal_transition(self, start, target):
        bus = stationed('sub0', 'A', state=start)
        with pytest.raises(InvariantViolation):
            bus.move_to(target)

    def test_fleet_ids_follow_plan_order(self):
        fleet = build_fleet(['C', 'A', 'C'], 'DEPOT')
        assert [(b, fleet[b].station) for b in sorted(fleet)] == [('sub0', 'C'), ('sub1', 'A'), ('sub2', 'C')]


class TestDispatchDecision:
    def test_overage_threshold_is_strict(self, line_schedule):
        fleet = {'sub0': stationed('sub0', 'B')}
        policy = PolicyConfig(overage_dispatch_fraction=0.1)
        rng = np.random.default_rng(0)
        at_threshold = DispatchRequest(EventType.OVERAGE, 'A', 0.0, left_behind=4, capacity=40)
        above = DispatchRequest(EventType.OVERAGE, 'A', 0.0, left_behind=5, capacity=40)
        assert dispatch_decision(at_threshold, fleet, line_schedule, policy, rng) is None
        assert dispatch_decision(above, fleet, line_schedule, policy, rng) == 'sub0'

    def test_disruption_ignores_threshold(self, line_schedule):
        fleet = {'sub0': stationed('sub0', 'B')}
        request = DispatchRequest(EventType.DISRUPTION, 'A', 0.0)
        policy = PolicyConfig(overage_dispatch_fraction=1.0)
        assert dispatch_decision(request, fleet, line_schedule, policy, np.random.default_rng(0)) == 'sub0'

    def test_nearest_available(self, line_schedule):
        fleet = {
            'sub0': stationed('sub0', 'C'),
            'sub1': stationed('sub1', 'HUB'),
            'sub2': stationed('sub2', 'A', state=BusState.COVERING),
            'sub3': SubstituteBus('sub3', 'B', 'DEPOT', BusState.IDLE),
        }
        request = DispatchRequest(EventType.DISRUPTION, 'A', 0.0)
        assert dispatch_decision(request, fleet, line_schedule, PolicyConfig(), np.random.default_rng(0)) == 'sub1'
        request = DispatchRequest(EventType.DISRUPTION, 'C', 0.0)
        assert dispatch_decision(request, fleet, line_schedule, PolicyConfig(), np.random.default_rng(0)) == 'sub0'

    def test_idle_bus_dispatched_from_where_it_stopped(self, line_schedule):
        fleet = {'sub0': stationed('sub0', 'HUB'), 'sub1': SubstituteBus('sub1', 'HUB', 'C', BusState.IDLE)}
        request = DispatchRequest(EventType.DISRUPTION, 'B', 0.0)
        assert dispatch_decision(request, fleet, line_schedule, PolicyConfig(), np.random.default_rng(0)) == 'sub1'

    def test_nobody_free(self, line_schedule):
        fleet = {'sub0': stationed('sub0', 'B', state=BusState.DISPATCHED)}
        request = DispatchRequest(EventType.DISRUPTION, 'A', 0.0)
        assert dispatch_decision(request, fleet, line_schedule, PolicyConfig(), np.random.default_rng(0)) is None

    def test_ties_broken_uniformly(self, line_schedule):
        fleet = {'sub0': stationed('sub0', 'B'), 'sub1': stationed('sub1', 'B')}
        request = DispatchRequest(EventType.DISRUPTION, 'A', 0.0)
        rng = np.random.default_rng(21)
        picks = [dispatch_decision(request, fleet, line_schedule, PolicyConfig(), rng) for _ in range(10000)]
        assert picks.count('sub0') / len(picks) == pytest.approx(0.5, abs=0.02)
        assert set(picks) == {'sub0', 'sub1'}


class TestCoverage:
    def test_overage_finishes_the_reporting_trip(self, line_schedule):
        plan = cover_overage(stationed('sub0', 'C'), 'B', line_schedule.trips['T1'], 1)
        assert plan.target_stop == 'B'
        assert plan.service_stops == [('T1', 'C')]

    def test_overage_stop_must_match(self, line_schedule):
        with pytest.raises(InvariantViolation):
            cover_overage(stationed('sub0', 'C'), 'A', line_schedule.trips['T1'], 1)

    def test_disruption_takes_over_the_block(self, line_schedule):
        plan = cover_disruption(stationed('sub0', 'HUB'), line_schedule.trips['T1'], 0, [line_schedule.trips['T2']])
        assert plan.target_stop == 'A'
        assert plan.service_stops == [('T1', 'B'), ('T1', 'C'), ('T2', 'C'), ('T2', 'B'), ('T2', 'A')]
