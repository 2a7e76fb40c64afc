# agents/optimizer_agent.py
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

from agents.base import BaseAgent
from config.settings import AnnealingConfig, Config, PolicyConfig
from simulator.chains import read_ridership_params
from stationing.optimizer import DayInputs, OptimizationReport, optimize_stationing_multi_day
from stationing.plans import save_plan
from transit_data.loader import load_schedule
from utils.schemas import validate_artifact

logger = logging.getLogger(__name__)


class OptimizerAgent(BaseAgent):
    """Chooses where to station substitute buses for the forecast service day(s)"""

    def __init__(self, name: str = "OptimizerAgent"):
        super().__init__(name)

    def execute(
        self,
        schedule_dir: str,
        model_path: str,
        context_path: str,
        ridership_path: str,
        out_dir: str,
        seed: int,
        k: int = Config.SUBSTITUTES,
        n_chains: int = Config.CHAINS,
        annealing: Optional[Dict[str, Any]] = None,
        policy: PolicyConfig = None,
        threads: int = 1,
        days: Optional[Sequence[str]] = None,
        baselines_only: bool = False,
    ) -> Dict[str, Any]:
        logger.info(f"{self.name}: Optimizing stationing of {k} substitute buses...")
        started = datetime.now()
        try:
            cfg = AnnealingConfig.from_dict({**(annealing or {}), 'seed': seed})
            policy = policy or PolicyConfig()
            schedule = load_schedule(schedule_dir)
            inputs: List[DayInputs] = []
            for day in (days or [None]):
                day_schedule = self._service_day(schedule, day)
                inputs.append(DayInputs(day_schedule, self._forecast(day_schedule, model_path, context_path)))

            report = optimize_stationing_multi_day(inputs, read_ridership_params(ridership_path), k, n_chains,
                                                   cfg, policy, threads, baselines_only)
            outputs = self._write_outputs(report, out_dir)

            config = {'k': k, 'n_chains': n_chains, 'annealing': cfg.to_dict(), 'policy': policy.to_dict(),
                      'days': list(days or []), 'baselines_only': baselines_only, 'threads': threads}
            manifest = self._write_manifest('optimize', config, seed,
                                            [schedule_dir, model_path, context_path, ridership_path],
                                            outputs, out_dir, started)
            winner = report.winner
            logger.info(f"{self.name}: {winner.name} plan wins with mean cost {winner.estimate.mean_cost:.4f}")
            return {'status': 'success', 'report': report, 'winner': winner.name,
                    'plan': list(winner.plan.assignments), 'files': outputs, 'manifest': manifest,
                    'timestamp': self._get_timestamp()}
        except Exception as e:
            return self._failure(e)

    def _write_outputs(self, report: OptimizationReport, out_dir: str) -> List[str]:
        os.makedirs(out_dir, exist_ok=True)
        plan_path = save_plan(report.winner.plan, os.path.join(out_dir, 'plan.json'))

        document = validate_artifact(report.to_dict(), 'report')
        report_path = os.path.join(out_dir, 'report.json')
        with open(report_path, 'w', encoding='utf-8') as f:
            json.dump(document, f, indent=2)

        history_path = os.path.join(out_dir, 'history.csv')
        report.history_frame().to_csv(history_path, index=False, lineterminator='\n')
        comparison_path = os.path.join(out_dir, 'comparison.csv')
        report.comparison_frame().to_csv(comparison_path, index=False, lineterminator='\n')
        return [plan_path, report_path, history_path, comparison_path]
