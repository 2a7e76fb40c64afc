# stationing/objective.py
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from config.settings import PolicyConfig
from simulator.chains import Chain
from simulator.costs import CostBreakdown
from simulator.engine import simulate_day
from stationing.plans import StationingPlan
from transit_data.schedule import Schedule
from utils.errors import DataError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveEstimate:
    """Monte-Carlo estimate of the expected day cost of one plan"""

    mean_cost: float
    std_error: float
    per_chain: Tuple[CostBreakdown, ...]
    n_chains: int

    def _mean(self, values) -> float:
        return math.fsum(values) / self.n_chains

    @property
    def deadhead_miles(self) -> float:
        return self._mean(c.deadhead_miles for c in self.per_chain)

    @property
    def deadhead_minutes(self) -> float:
        return self._mean(c.deadhead_minutes for c in self.per_chain)

    @property
    def left_behind(self) -> float:
        return self._mean(c.left_behind for c in self.per_chain)

    def to_dict(self) -> Dict:
        return {
            'mean_cost': self.mean_cost,
            'std_error': self.std_error,
            'deadhead_miles': self.deadhead_miles,
            'deadhead_minutes': self.deadhead_minutes,
            'left_behind': self.left_behind,
            'n_chains': self.n_chains,
        }


def summarize(costs: Sequence[CostBreakdown]) -> ObjectiveEstimate:
    """Mean and standard error of the totals; exact summation keeps it order-free"""
    n = len(costs)
    if n == 0:
        raise DataError("Cannot summarize an empty set of chain costs")
    totals = [c.total() for c in costs]
    mean = math.fsum(totals) / n
    if n == 1:
        std_error = 0.0
    else:
        variance = math.fsum((x - mean) ** 2 for x in totals) / (n - 1)
        std_error = math.sqrt(variance) / math.sqrt(n)
    return ObjectiveEstimate(mean, std_error, tuple(costs), n)


def evaluate_plan(
    plan: StationingPlan,
    schedule: Schedule,
    chains: Sequence[Chain],
    policy: PolicyConfig = None,
    seed: int = 0,
    threads: int = 1,
    check_chains: bool = True,
) -> ObjectiveEstimate:
    """Simulate the plan once per chain; chain ``c`` always runs with seed derive(seed, c.chain_id)"""
    if not chains:
        raise DataError("evaluate_plan needs at least one chain")
    policy = policy or PolicyConfig()
    plan.validate(schedule)

    def run(chain: Chain) -> CostBreakdown:
        return simulate_day(schedule, chain, plan, policy, derive_seed(seed, chain.chain_id),
                            check_chain=check_chains).cost

    if threads > 1 and len(chains) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            costs = list(pool.map(run, chains))
    else:
        costs = [run(chain) for chain in chains]
    return summarize(costs)


class PlanEvaluator:
    """Objective over a fixed chain set, memoized by assignment"""

    def __init__(self, schedule: Schedule, chains: Sequence[Chain], policy: PolicyConfig = None,
                 seed: int = 0, threads: int = 1):
        if not chains:
            raise DataError("PlanEvaluator needs at least one chain")
        self.schedule = schedule
        self.chains = list(chains)
        self.policy = policy or PolicyConfig()
        self.seed = seed
        self.threads = threads
        for chain in self.chains:
            chain.validate(schedule)
        self._cache: Dict[Tuple[str, ...], ObjectiveEstimate] = {}
        self.evaluations = 0

    def estimate(self, plan: StationingPlan) -> ObjectiveEstimate:
        """Plans holding the same stops in any order share one estimate, simulated in sorted order"""
        key = tuple(sorted(plan.assignments))
        if key not in self._cache:
            canonical = StationingPlan(key, plan.provenance)
            self._cache[key] = evaluate_plan(canonical, self.schedule, self.chains, self.policy,
                                             self.seed, self.threads, check_chains=False)
            self.evaluations += 1
        return self._cache[key]

    def __call__(self, plan: StationingPlan) -> float:
        return self.estimate(plan).mean_cost


class MultiDayEvaluator:
    """Pools the chains of several service days; each day keeps its own common random numbers"""

    def __init__(self, days: Sequence[PlanEvaluator]):
        if not days:
            raise DataError("MultiDayEvaluator needs at least one day")
        self.days = list(days)

    @property
    def schedule(self) -> Schedule:
        return self.days[0].schedule

    @property
    def evaluations(self) -> int:
        return sum(day.evaluations for day in self.days)

    def estimate(self, plan: StationingPlan) -> ObjectiveEstimate:
        costs: List[CostBreakdown] = []
        for day in self.days:
            costs.extend(day.estimate(plan).per_chain)
        return summarize(costs)

    def __call__(self, plan: StationingPlan) -> float:
        return self.estimate(plan).mean_cost
