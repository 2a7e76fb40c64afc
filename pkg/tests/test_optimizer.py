import math
from datetime import date

import pytest

from config.settings import AnnealingConfig, PolicyConfig
from conftest import build_line_schedule, corridor_ridership
from simulator.chains import RidershipParams, sample_chains
from simulator.costs import CostBreakdown
from stationing.objective import MultiDayEvaluator, PlanEvaluator, evaluate_plan, summarize
from stationing.optimizer import DayInputs, optimize_stationing, optimize_stationing_multi_day
from stationing.plans import StationingPlan
from utils.errors import DataError
from utils.schemas import validate_artifact

PARAMS = RidershipParams(
    boarding={('T1', 'A'): 6.0, ('T1', 'B'): 3.0, ('T2', 'C'): 5.0, ('T2', 'B'): 2.0},
    alighting={('T1', 'C'): 9.0, ('T2', 'A'): 7.0},
)
PROBS = {'T1': 0.6, 'T2': 0.4}
# small buses so overages happen too
POLICY = PolicyConfig(bus_capacity=4)


@pytest.fixture
def chains(line_schedule):
    return sample_chains(line_schedule, PROBS, PARAMS, 12, seed=5)


class TestSummarize:
    def test_mean_and_standard_error(self):
        estimate = summarize([CostBreakdown(1.0, 0.0), CostBreakdown(3.0, 0.0)])
        assert estimate.mean_cost == 2.0
        assert estimate.std_error == pytest.approx(1.0)
        assert estimate.deadhead_miles == 2.0

    def test_single_chain_has_no_spread(self):
        assert summarize([CostBreakdown(2.0, 1.0, {'A': 3})]).std_error == 0.0

    def test_empty(self):
        with pytest.raises(DataError):
            summarize([])

    def test_weights_apply(self):
        cost = CostBreakdown(1.0, 2.0, {'A': 3}, weights=(0.5, 2.0))
        assert cost.total() == 1.0 + 0.5 * 2.0 + 2.0 * 3
        assert cost.total(w_T=0.0, w_L=0.0) == 1.0


class TestEvaluatePlan:
    def test_chain_order_does_not_matter(self, line_schedule, chains):
        plan = StationingPlan(('B',))
        forward = evaluate_plan(plan, line_schedule, chains, POLICY, seed=2)
        backward = evaluate_plan(plan, line_schedule, list(reversed(chains)), POLICY, seed=2)
        assert forward.mean_cost == backward.mean_cost
        assert forward.n_chains == 12

    def test_threads_do_not_change_the_estimate(self, line_schedule, chains):
        plan = StationingPlan(('HUB',))
        serial = evaluate_plan(plan, line_schedule, chains, POLICY, seed=2)
        pooled = evaluate_plan(plan, line_schedule, chains, POLICY, seed=2, threads=3)
        assert serial.mean_cost == pooled.mean_cost
        assert serial.std_error == pooled.std_error

    def test_no_chains(self, line_schedule):
        with pytest.raises(DataError):
            evaluate_plan(StationingPlan(('B',)), line_schedule, [])

    def test_evaluator_memoizes(self, line_schedule, chains):
        evaluator = PlanEvaluator(line_schedule, chains, POLICY, seed=2)
        first = evaluator(StationingPlan(('A',)))
        second = evaluator(StationingPlan(('A',)))
        assert first == second
        assert evaluator.evaluations == 1

    def test_multi_day_pools_chains(self, line_schedule, chains):
        other = build_line_schedule(date(2024, 1, 4))
        days = MultiDayEvaluator([
            PlanEvaluator(line_schedule, chains, POLICY, seed=2),
            PlanEvaluator(other, sample_chains(other, PROBS, PARAMS, 8, seed=6), POLICY, seed=3),
        ])
        estimate = days.estimate(StationingPlan(('C',)))
        assert estimate.n_chains == 20
        assert days.evaluations == 2


class TestOptimize:
    @pytest.fixture
    def report(self, line_schedule):
        cfg = AnnealingConfig(n_iters=15, initial_temp=10.0, seed=11)
        return optimize_stationing(line_schedule, PROBS, PARAMS, 1, 6, cfg, POLICY)

    def test_plans_compared(self, report):
        assert list(report.plans) == ['Garage', 'Hub', 'Greedy', 'Search']
        assert report.winner.estimate.mean_cost == min(r.estimate.mean_cost for r in report.plans.values())
        assert report.search_cost <= report.greedy_cost
        assert len(report.greedy_rounds) == 1
        assert report.plans['Garage'].plan.assignments == ('DEPOT',)

    def test_report_matches_schema(self, report):
        document = validate_artifact(report.to_dict(), 'report')
        assert document['winner'] == report.winner.name
        assert len(document['history']['current_cost']) == 16

    def test_frames(self, report):
        history = report.history_frame()
        assert len(history) == 16
        assert list(history.columns) == ['iteration', 'temperature', 'current_cost', 'best_cost',
                                         'current_normalized', 'best_normalized']
        comparison = report.comparison_frame()
        assert comparison['plan'].tolist() == ['Garage', 'Hub', 'Greedy', 'Search']

    def test_agency_baseline_when_configured(self):
        schedule = build_line_schedule(agency_plan=('A',))
        report = optimize_stationing(schedule, PROBS, PARAMS, 1, 3, AnnealingConfig(n_iters=0), POLICY,
                                     baselines_only=True)
        assert list(report.plans) == ['Garage', 'Hub', 'Agency']
        assert report.annealing is None
        assert report.to_dict()['history'] is None

    def test_seeded(self, line_schedule):
        cfg = AnnealingConfig(n_iters=10, seed=2)
        first = optimize_stationing(line_schedule, PROBS, PARAMS, 1, 4, cfg, POLICY)
        second = optimize_stationing(line_schedule, PROBS, PARAMS, 1, 4, cfg, POLICY)
        assert first.to_dict() == second.to_dict()

    def test_multi_day(self, line_schedule):
        days = [DayInputs(line_schedule, PROBS), DayInputs(build_line_schedule(date(2024, 1, 4)), PROBS)]
        report = optimize_stationing_multi_day(days, PARAMS, 1, 3, AnnealingConfig(n_iters=5, seed=1), POLICY)
        assert report.n_days == 2
        assert report.winner.estimate.n_chains == 6
        assert math.isfinite(report.winner.estimate.mean_cost)

    def test_no_days(self):
        with pytest.raises(DataError):
            optimize_stationing_multi_day([], PARAMS, 1, 3, AnnealingConfig())


class TestCorridorStationing:
    """Disruption-heavy corridor far from the garage; a stranded rider outweighs any deadhead"""

    @pytest.fixture(scope='class')
    def report(self, corridor_schedule):
        policy = PolicyConfig(patience_s=300, arrival_window_s=0, cost_weights=(1.0, 100.0))
        cfg = AnnealingConfig(n_iters=60, initial_temp=50.0, seed=17, cooling='direct')
        probs = {trip_id: 0.5 for trip_id in corridor_schedule.trips}
        return optimize_stationing(corridor_schedule, probs, corridor_ridership(), 2, 60, cfg, policy)

    def test_greedy_beats_the_garage(self, report):
        greedy, garage = report.plans['Greedy'].estimate, report.plans['Garage'].estimate
        margin = 2 * math.sqrt(greedy.std_error ** 2 + garage.std_error ** 2)
        assert greedy.mean_cost < garage.mean_cost - margin

    def test_search_strands_fewest_riders(self, report):
        search = report.plans['Search'].estimate
        for name in ('Garage', 'Hub', 'Agency'):
            assert search.left_behind <= report.plans[name].estimate.left_behind, name

    def test_search_deadhead_stays_near_the_agency_plan(self, report):
        search, agency = report.plans['Search'].estimate, report.plans['Agency'].estimate
        assert search.deadhead_miles <= 1.1 * agency.deadhead_miles
