# agents/simulation_agent.py
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd

from agents.base import BaseAgent
from config.settings import PolicyConfig
from simulator.chains import Chain, read_chain_dir, read_ridership_params, sample_chains
from simulator.engine import simulate_day, validate_trace, write_trace
from stationing.objective import summarize
from stationing.plans import Provenance, StationingPlan, baseline_plan, load_plan
from transit_data.loader import load_schedule
from transit_data.schedule import Schedule
from utils.errors import ConfigError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)


def resolve_plan(plan: str, schedule: Schedule, k: int) -> StationingPlan:
    """A plan file path, or the name of a baseline (Garage, Hub, Agency)"""
    baselines = {p.value.lower(): p for p in (Provenance.GARAGE, Provenance.HUB, Provenance.AGENCY)}
    if plan.lower() in baselines and not os.path.exists(plan):
        return baseline_plan(baselines[plan.lower()], schedule, k)
    return load_plan(plan)


class SimulationAgent(BaseAgent):
    """Runs one stationing plan over a chain set and reports per-chain costs"""

    def __init__(self, name: str = "SimulationAgent"):
        super().__init__(name)

    def _chains(self, schedule: Schedule, seed: int, chains_dir: Optional[str], model_path: Optional[str],
                context_path: Optional[str], ridership_path: Optional[str], n_chains: int) -> List[Chain]:
        if chains_dir:
            return read_chain_dir(chains_dir)
        if not (model_path and context_path and ridership_path):
            raise ConfigError("Give either a chain directory or a model, trip context and ridership file")
        probs = self._forecast(schedule, model_path, context_path)
        return sample_chains(schedule, probs, read_ridership_params(ridership_path), n_chains,
                             derive_seed(seed, 1, 0))

    def execute(
        self,
        schedule_dir: str,
        plan: str,
        out_dir: str,
        seed: int,
        policy: PolicyConfig = None,
        k: int = 5,
        day: Optional[str] = None,
        chains_dir: Optional[str] = None,
        model_path: Optional[str] = None,
        context_path: Optional[str] = None,
        ridership_path: Optional[str] = None,
        n_chains: int = 100,
    ) -> Dict[str, Any]:
        logger.info(f"{self.name}: Simulating plan {plan}...")
        started = datetime.now()
        try:
            policy = policy or PolicyConfig()
            schedule = self._service_day(load_schedule(schedule_dir), day)
            stationing = resolve_plan(plan, schedule, k)
            chains = self._chains(schedule, seed, chains_dir, model_path, context_path, ridership_path, n_chains)

            results = []
            for chain in chains:
                result = simulate_day(schedule, chain, stationing, policy, derive_seed(seed, chain.chain_id))
                result.stats.check_conservation()
                results.append((chain, result))
            estimate = summarize([r.cost for _, r in results])

            os.makedirs(out_dir, exist_ok=True)
            costs = pd.DataFrame([{
                'chain_id': chain.chain_id,
                'disruptions': len(chain.disruptions),
                'dispatches': r.stats.dispatches,
                'deadhead_miles': r.cost.deadhead_miles,
                'deadhead_minutes': r.cost.deadhead_minutes,
                'left_behind': r.cost.left_behind,
                'total': r.cost.total(),
            } for chain, r in results])
            costs_path = os.path.join(out_dir, 'costs.csv')
            costs.to_csv(costs_path, index=False, lineterminator='\n')

            first_chain, first = results[0]
            trace_path = write_trace(validate_trace(first.trace), os.path.join(out_dir, 'trace.jsonl'))

            summary = {'plan': stationing.to_dict(), **estimate.to_dict(), 'trace_chain_id': first_chain.chain_id}
            summary_path = os.path.join(out_dir, 'summary.json')
            with open(summary_path, 'w', encoding='utf-8') as f:
                json.dump(summary, f, indent=2)

            outputs = [costs_path, trace_path, summary_path]
            inputs = [schedule_dir, plan, chains_dir, model_path, context_path, ridership_path]
            config = {'plan': plan, 'k': k, 'day': day, 'n_chains': len(chains), 'policy': policy.to_dict()}
            manifest = self._write_manifest('simulate', config, seed, inputs, outputs, out_dir, started)
            logger.info(f"{self.name}: mean cost {estimate.mean_cost:.4f} over {len(chains)} chains")
            return {'status': 'success', 'summary': summary, 'costs': costs, 'files': outputs,
                    'manifest': manifest, 'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)
