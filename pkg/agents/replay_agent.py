# agents/replay_agent.py
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from agents.base import BaseAgent
from config.settings import PolicyConfig
from simulator.chains import read_chain_dir
from stationing.objective import ObjectiveEstimate, evaluate_plan
from stationing.optimizer import BASELINES
from stationing.plans import MissingAgencyPlan, baseline_plan, load_plan
from transit_data.loader import load_schedule
from utils.errors import ConfigError
from utils.schemas import validate_artifact

logger = logging.getLogger(__name__)


def replay_table(results: Dict[str, Any]) -> pd.DataFrame:
    """Deadhead miles, deadhead minutes and passengers left behind per plan"""
    return pd.DataFrame([{
        'plan': name,
        'assignments': ' '.join(plan.assignments),
        'deadhead_miles': estimate.deadhead_miles,
        'deadhead_minutes': estimate.deadhead_minutes,
        'left_behind': estimate.left_behind,
        'mean_cost': estimate.mean_cost,
        'std_error': estimate.std_error,
    } for name, (plan, estimate) in results.items()])


class ReplayAgent(BaseAgent):
    """Freezes stationing plans and replays them on held-out ground-truth chains"""

    def __init__(self, name: str = "ReplayAgent"):
        super().__init__(name)

    def execute(
        self,
        schedule_dir: str,
        plan_paths: Sequence[str],
        chains_dir: str,
        out_dir: str,
        seed: int,
        policy: PolicyConfig = None,
        day: Optional[str] = None,
        threads: int = 1,
        include_baselines: bool = True,
    ) -> Dict[str, Any]:
        logger.info(f"{self.name}: Replaying {len(plan_paths)} plan(s) on {chains_dir}...")
        started = datetime.now()
        try:
            if not plan_paths:
                raise ConfigError("replay needs at least one plan file")
            policy = policy or PolicyConfig()
            plans = {}
            for path in plan_paths:
                plan = load_plan(path)
                name = plan.provenance.value
                if name in plans:
                    name = f"{name} ({os.path.basename(path)})"
                plans[name] = plan

            schedule = self._service_day(load_schedule(schedule_dir), day)
            chains = read_chain_dir(chains_dir)
            if include_baselines:
                k = next(iter(plans.values())).k
                for kind in BASELINES:
                    if kind.value in plans:
                        continue
                    try:
                        plans[kind.value] = baseline_plan(kind, schedule, k)
                    except MissingAgencyPlan:
                        logger.warning(f"{self.name}: no agency plan in network.json, skipping Agency")

            results: Dict[str, tuple] = {}
            for name, plan in plans.items():
                estimate: ObjectiveEstimate = evaluate_plan(plan, schedule, chains, policy, seed, threads)
                results[name] = (plan, estimate)
                logger.info(f"{self.name}: {name} left {estimate.left_behind:.2f} behind, "
                            f"{estimate.deadhead_miles:.2f} deadhead miles")

            document = validate_artifact({
                'n_chains': len(chains),
                'seed': seed,
                'plans': {name: {'plan': plan.to_dict(), **estimate.to_dict()}
                          for name, (plan, estimate) in results.items()},
            }, 'replay')
            os.makedirs(out_dir, exist_ok=True)
            json_path = os.path.join(out_dir, 'replay.json')
            with open(json_path, 'w', encoding='utf-8') as f:
                json.dump(document, f, indent=2)
            table = replay_table(results)
            csv_path = os.path.join(out_dir, 'replay.csv')
            table.to_csv(csv_path, index=False, lineterminator='\n')

            outputs = [json_path, csv_path]
            config = {'plans': list(plan_paths), 'day': day, 'include_baselines': include_baselines,
                      'policy': policy.to_dict()}
            manifest = self._write_manifest('replay', config, seed, [schedule_dir, chains_dir, *plan_paths],
                                            outputs, out_dir, started)
            return {'status': 'success', 'table': table, 'files': outputs, 'manifest': manifest,
                    'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)
