# agents/report_agent.py
import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional

import pandas as pd

from stationing.optimizer import OptimizationReport

logger = logging.getLogger(__name__)


class ReportGeneratorAgent:
    """Renders optimization and replay results as a markdown report next to the run outputs"""

    def __init__(self, name: str = "ReportGeneratorAgent"):
        self.name = name

    def execute(self, out_dir: str, optimization: Optional[OptimizationReport] = None,
                replay: Optional[pd.DataFrame] = None) -> Dict[str, Any]:
        logger.info(f"{self.name}: Writing stationing report...")
        try:
            if optimization is None and replay is None:
                raise ValueError("Nothing to report")
            content = self._generate_report_content(optimization, replay)
            filepath = self._save_report(content, out_dir)
            logger.info(f"{self.name}: Report written to {filepath}")
            return {
                'status': 'success',
                'filename': filepath,
                'content': content,
                'timestamp': self._get_timestamp(),
            }
        except Exception as e:
            logger.error(f"{self.name}: Report generation error: {e}")
            return {
                'status': 'error',
                'error': str(e),
                'timestamp': self._get_timestamp(),
            }

    def _generate_report_content(self, optimization: Optional[OptimizationReport],
                                 replay: Optional[pd.DataFrame]) -> str:
        report = "# Substitute Bus Stationing Report\n"
        if optimization is not None:
            report += self._optimization_section(optimization)
        if replay is not None:
            report += self._replay_section(replay)
        return report

    def _optimization_section(self, optimization: OptimizationReport) -> str:
        winner = optimization.winner
        section = f"""
## Optimization

- **Substitute buses:** {optimization.k}
- **Chains per day:** {optimization.n_chains} over {optimization.n_days} day(s)
- **Seed:** {optimization.seed}
- **Recommended plan:** {winner.name}, stationed at {', '.join(winner.plan.assignments) or 'no stops'}

| Plan | Stops | Mean cost | Std. error | Deadhead miles | Deadhead minutes | Left behind |
|------|-------|-----------|------------|----------------|------------------|-------------|
"""
        for name, result in optimization.plans.items():
            est = result.estimate
            section += (f"| {name} | {' '.join(result.plan.assignments)} | {est.mean_cost:.2f} | "
                        f"{est.std_error:.2f} | {est.deadhead_miles:.2f} | {est.deadhead_minutes:.2f} | "
                        f"{est.left_behind:.2f} |\n")

        if optimization.greedy_rounds:
            section += "\n### Greedy rounds\n\n"
            for r in optimization.greedy_rounds:
                section += f"{r.round}. {r.choice} (cost {r.cost:.2f})\n"

        if optimization.annealing is not None:
            annealing = optimization.annealing
            improvement = optimization.greedy_cost - optimization.search_cost
            section += f"""
### Annealing

- **Iterations:** {len(annealing.history) - 1}, {annealing.accepted} moves accepted
- **Best plan first reached at iteration:** {annealing.best_iteration}
- **Improvement over greedy:** {improvement:.2f}
"""
        return section

    def _replay_section(self, replay: pd.DataFrame) -> str:
        section = """
## Replay on ground-truth scenarios

| Plan | Stops | Deadhead miles | Deadhead minutes | Left behind | Mean cost |
|------|-------|----------------|------------------|-------------|-----------|
"""
        for row in replay.itertuples(index=False):
            section += (f"| {row.plan} | {row.assignments} | {row.deadhead_miles:.2f} | "
                        f"{row.deadhead_minutes:.2f} | {row.left_behind:.2f} | {row.mean_cost:.2f} |\n")
        best = replay.loc[replay['left_behind'].idxmin()]
        section += f"\nFewest passengers left behind: **{best['plan']}** ({best['left_behind']:.2f} per day)\n"
        return section

    def _save_report(self, content: str, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        filepath = os.path.join(out_dir, 'report.md')
        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(content)
        return filepath

    def _get_timestamp(self) -> str:
        return datetime.now().isoformat()
