# stationing/optimizer.py
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import pandas as pd

from config.settings import AnnealingConfig, PolicyConfig
from simulator.chains import RidershipParams, sample_chains
from stationing.objective import MultiDayEvaluator, ObjectiveEstimate, PlanEvaluator
from stationing.plans import MissingAgencyPlan, Provenance, StationingPlan, baseline_plan
from stationing.search import AnnealingResult, GreedyRound, greedy_select, simulated_annealing
from transit_data.schedule import Schedule
from utils.errors import DataError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

BASELINES = (Provenance.GARAGE, Provenance.HUB, Provenance.AGENCY)


@dataclass(frozen=True)
class DayInputs:
    schedule: Schedule
    disruption_probs: Dict[str, float]


@dataclass(frozen=True)
class PlanResult:
    name: str
    plan: StationingPlan
    estimate: ObjectiveEstimate

    def to_dict(self) -> Dict:
        return {'plan': self.plan.to_dict(), **self.estimate.to_dict()}


@dataclass
class OptimizationReport:
    k: int
    n_chains: int
    seed: int
    plans: Dict[str, PlanResult] = field(default_factory=dict)
    greedy_rounds: List[GreedyRound] = field(default_factory=list)
    annealing: Optional[AnnealingResult] = None
    n_days: int = 1

    @property
    def winner(self) -> PlanResult:
        # earliest entry wins ties, so baselines beat an equally good search result
        return min(self.plans.values(), key=lambda r: r.estimate.mean_cost)

    @property
    def greedy_cost(self) -> Optional[float]:
        result = self.plans.get(Provenance.GREEDY.value)
        return result.estimate.mean_cost if result else None

    @property
    def search_cost(self) -> Optional[float]:
        result = self.plans.get(Provenance.SEARCH.value)
        return result.estimate.mean_cost if result else None

    @property
    def normalizer(self) -> Optional[float]:
        garage = self.plans.get(Provenance.GARAGE.value)
        if garage is None or garage.estimate.mean_cost <= 0:
            return None
        return garage.estimate.mean_cost

    def history_frame(self) -> pd.DataFrame:
        """One row per annealing iteration, raw and normalized by the Garage cost"""
        columns = ['iteration', 'temperature', 'current_cost', 'best_cost',
                   'current_normalized', 'best_normalized']
        if self.annealing is None:
            return pd.DataFrame(columns=columns)
        scale = self.normalizer
        frame = pd.DataFrame({
            'iteration': range(len(self.annealing.history)),
            'temperature': self.annealing.temperatures,
            'current_cost': self.annealing.history,
            'best_cost': self.annealing.best_history,
        })
        frame['current_normalized'] = frame['current_cost'] / scale if scale else float('nan')
        frame['best_normalized'] = frame['best_cost'] / scale if scale else float('nan')
        return frame[columns]

    def comparison_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'plan': name,
            'assignments': ' '.join(result.plan.assignments),
            **result.estimate.to_dict(),
        } for name, result in self.plans.items()])

    def to_dict(self) -> Dict:
        scale = self.normalizer
        document = {
            'k': self.k,
            'n_chains': self.n_chains,
            'n_days': self.n_days,
            'seed': self.seed,
            'plans': {name: result.to_dict() for name, result in self.plans.items()},
            'winner': self.winner.name if self.plans else None,
            'greedy_cost': self.greedy_cost,
            'search_cost': self.search_cost,
            'greedy_rounds': [{'round': r.round, 'choice': r.choice, 'cost': r.cost,
                               'candidate_costs': r.candidate_costs} for r in self.greedy_rounds],
            'history': None,
        }
        if self.annealing is not None:
            document['best_iteration'] = self.annealing.best_iteration
            document['history'] = {
                'current_cost': list(self.annealing.history),
                'best_cost': list(self.annealing.best_history),
                'temperature': list(self.annealing.temperatures),
                'current_normalized': [c / scale for c in self.annealing.history] if scale else None,
                'best_normalized': [c / scale for c in self.annealing.best_history] if scale else None,
            }
        return document


def _baselines(evaluator, schedule: Schedule, k: int, report: OptimizationReport):
    for kind in BASELINES:
        try:
            plan = baseline_plan(kind, schedule, k)
        except MissingAgencyPlan:
            logger.warning("No agency plan configured, skipping the Agency baseline")
            continue
        if plan.k != k:
            logger.warning(f"{kind.value} plan stations {plan.k} buses, not {k}")
        report.plans[kind.value] = PlanResult(kind.value, plan, evaluator.estimate(plan))
        logger.info(f"{kind.value} plan {list(plan.assignments)}: "
                    f"mean cost {report.plans[kind.value].estimate.mean_cost:.4f}")


def run_search(evaluator, schedule: Schedule, k: int, cfg: AnnealingConfig, report: OptimizationReport,
               baselines_only: bool = False) -> OptimizationReport:
    """Baselines, then greedy seeding refined by annealing, all on one evaluator"""
    _baselines(evaluator, schedule, k, report)
    if baselines_only:
        return report
    candidates = schedule.candidate_stationing_stops
    greedy = greedy_select(candidates, k, evaluator, report.greedy_rounds)
    report.plans[Provenance.GREEDY.value] = PlanResult(Provenance.GREEDY.value, greedy, evaluator.estimate(greedy))

    report.annealing = simulated_annealing(greedy, cfg, evaluator, candidates)
    best = report.annealing.best_plan
    report.plans[Provenance.SEARCH.value] = PlanResult(Provenance.SEARCH.value, best, evaluator.estimate(best))
    logger.info(f"Search plan {list(best.assignments)}: cost {report.search_cost:.4f} "
                f"(greedy {report.greedy_cost:.4f}, best at iteration {report.annealing.best_iteration}, "
                f"{evaluator.evaluations} distinct plans simulated)")
    return report


def optimize_stationing(
    schedule: Schedule,
    disruption_probs: Dict[str, float],
    ridership_params: RidershipParams,
    k: int,
    n_chains: int,
    cfg: AnnealingConfig,
    policy: PolicyConfig = None,
    threads: int = 1,
    baselines_only: bool = False,
) -> OptimizationReport:
    """Sample chains once and compare baselines, greedy and annealed plans on them"""
    return optimize_stationing_multi_day([DayInputs(schedule, disruption_probs)], ridership_params, k,
                                         n_chains, cfg, policy, threads, baselines_only)


def optimize_stationing_multi_day(
    days: Sequence[DayInputs],
    ridership_params: RidershipParams,
    k: int,
    n_chains: int,
    cfg: AnnealingConfig,
    policy: PolicyConfig = None,
    threads: int = 1,
    baselines_only: bool = False,
) -> OptimizationReport:
    """Same search with the objective averaged over the chains of every day"""
    if not days:
        raise DataError("No service days to optimize over")
    policy = policy or PolicyConfig()
    evaluators = []
    for d, day in enumerate(days):
        chains = sample_chains(day.schedule, day.disruption_probs, ridership_params, n_chains,
                               derive_seed(cfg.seed, 1, d))
        evaluators.append(PlanEvaluator(day.schedule, chains, policy, derive_seed(cfg.seed, 2, d), threads))
    evaluator = evaluators[0] if len(evaluators) == 1 else MultiDayEvaluator(evaluators)
    report = OptimizationReport(k=k, n_chains=n_chains, seed=cfg.seed, n_days=len(days))
    return run_search(evaluator, days[0].schedule, k, cfg, report, baselines_only)
