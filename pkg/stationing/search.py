# stationing/search.py
"""Greedy seeding, one-swap neighbours and simulated annealing over stationing plans."""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config.settings import AnnealingConfig
from stationing.plans import Provenance, StationingPlan
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

# hyperbolic cooling reaches zero in double precision within a few hundred steps
TEMP_FLOOR = 1e-300

Evaluator = Callable[[StationingPlan], float]


class NotEnoughCandidates(ConfigError):
    pass


class NoSpareCandidates(ConfigError):
    pass


class NonPositiveTemperature(ConfigError):
    pass


@dataclass(frozen=True)
class GreedyRound:
    round: int
    choice: str
    cost: float
    candidate_costs: Dict[str, float]


def greedy_select(candidates: Sequence[str], k: int, evaluator: Evaluator,
                  rounds: Optional[List[GreedyRound]] = None) -> StationingPlan:
    """Add, k times, the candidate that makes the partial plan cheapest"""
    pool = sorted(set(candidates))
    if k > len(pool):
        raise NotEnoughCandidates(f"k={k} exceeds the {len(pool)} stationing candidates")
    chosen: List[str] = []
    for r in range(k):
        costs: Dict[str, float] = {}
        best_stop, best_cost = None, None
        # sorted iteration with a strict comparison keeps the lexicographically first on ties
        for stop_id in pool:
            if stop_id in chosen:
                continue
            cost = evaluator(StationingPlan(tuple(chosen + [stop_id]), Provenance.GREEDY))
            costs[stop_id] = cost
            if best_cost is None or cost < best_cost:
                best_stop, best_cost = stop_id, cost
        chosen.append(best_stop)
        logger.info(f"Greedy round {r + 1}/{k}: {best_stop} (cost {best_cost:.4f})")
        if rounds is not None:
            rounds.append(GreedyRound(r + 1, best_stop, best_cost, costs))
    return StationingPlan(tuple(chosen), Provenance.GREEDY)


def neighbor(plan: StationingPlan, candidates: Sequence[str], rng: np.random.Generator) -> StationingPlan:
    """Move one uniformly chosen bus to a uniformly chosen unused candidate"""
    spare = sorted(set(candidates) - set(plan.assignments))
    if not spare or plan.k == 0:
        raise NoSpareCandidates(f"No unused candidate to move any of {plan.k} buses to")
    position = int(rng.integers(plan.k))
    replacement = spare[int(rng.integers(len(spare)))]
    return StationingPlan(plan.replace(position, replacement).assignments, Provenance.SEARCH)


def accept(delta: float, temp: float, rng: np.random.Generator) -> bool:
    """Metropolis rule"""
    if not temp > 0:
        raise NonPositiveTemperature(f"Temperature must be positive, got {temp}")
    if delta < 0:
        return True
    return bool(rng.random() < math.exp(-delta / temp))


def next_temperature(temp: float, n: int, cfg: AnnealingConfig) -> float:
    if cfg.cooling == 'direct':
        return cfg.initial_temp / (cfg.gamma + n)
    return temp / (cfg.gamma + n)


@dataclass
class AnnealingResult:
    best_plan: StationingPlan
    best_cost: float
    best_iteration: int = 0
    history: List[float] = field(default_factory=list)
    best_history: List[float] = field(default_factory=list)
    temperatures: List[float] = field(default_factory=list)
    accepted: int = 0


def simulated_annealing(initial: StationingPlan, cfg: AnnealingConfig, evaluator: Evaluator,
                        candidates: Sequence[str]) -> AnnealingResult:
    """Anneal from ``initial``; returns the best plan ever visited and the current-cost history"""
    rng = np.random.default_rng(cfg.seed)
    current, current_cost = initial, evaluator(initial)
    result = AnnealingResult(StationingPlan(initial.assignments, Provenance.SEARCH), current_cost, 0,
                             [current_cost], [current_cost], [cfg.initial_temp])

    if not set(candidates) - set(initial.assignments) or initial.k == 0:
        if cfg.n_iters:
            logger.warning("Every candidate is already used, nothing to anneal")
        return result

    temp = cfg.initial_temp
    for n in range(cfg.n_iters):
        proposal = neighbor(current, candidates, rng)
        cost = evaluator(proposal)
        if accept(cost - current_cost, max(temp, TEMP_FLOOR), rng):
            current, current_cost = proposal, cost
            result.accepted += 1
        if current_cost < result.best_cost:
            result.best_plan, result.best_cost, result.best_iteration = current, current_cost, n + 1
        result.history.append(current_cost)
        result.best_history.append(result.best_cost)
        temp = next_temperature(temp, n, cfg)
        result.temperatures.append(temp)
        if (n + 1) % 50 == 0:
            logger.info(f"Annealing {n + 1}/{cfg.n_iters}: current {current_cost:.4f}, "
                        f"best {result.best_cost:.4f}, temperature {temp:.3g}")

    result.best_plan = StationingPlan(result.best_plan.assignments, Provenance.SEARCH)
    return result
