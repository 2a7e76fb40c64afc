# main.py
#!/usr/bin/env python3
"""
Substitute bus stationing: disruption forecasting, day simulation and plan search
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from agents.forecast_agent import ForecastAgent
from agents.generator_agent import GeneratorAgent
from agents.optimizer_agent import OptimizerAgent
from agents.replay_agent import ReplayAgent
from agents.report_agent import ReportGeneratorAgent
from agents.simulation_agent import SimulationAgent
from config.settings import Config, check_config, load_run_config
from utils.errors import TransitError, exit_code_for

logger = logging.getLogger(__name__)

# Setup rich consoles; errors go to stderr
console = Console()
err_console = Console(stderr=True)


def setup_logging():
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(Config.LOG_FILE),
            logging.StreamHandler()
        ]
    )


class StationingOrchestrator:
    """Routes each command to its agent and summarizes the outcome"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.generator = GeneratorAgent()
        self.forecaster = ForecastAgent()
        self.simulator = SimulationAgent()
        self.optimizer = OptimizerAgent()
        self.replayer = ReplayAgent()
        self.reporter = ReportGeneratorAgent()

    def _data(self, name: str) -> str:
        return os.path.join(self.args.data, name)

    def _run(self, description: str, step, *args, **kwargs) -> Dict[str, Any]:
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            transient=True,
        ) as progress:
            task = progress.add_task(description, total=None)
            result = step(*args, **kwargs)
            progress.update(task, completed=True)
        if result.get('status') != 'success':
            err_console.print(f"❌ {result.get('error', 'Unknown error')}", style="bold red")
        return result

    def run(self) -> int:
        command = self.args.command
        if command == 'forecast':
            command = f"forecast {self.args.forecast_command}"
        handler = {
            'gen': self.generate,
            'forecast train': self.train,
            'forecast eval': self.evaluate,
            'forecast select-features': self.select_features,
            'forecast perm-test': self.permutation_test,
            'simulate': self.simulate,
            'optimize': self.optimize,
            'replay': self.replay,
        }[command]
        result = handler()
        if result.get('status') != 'success':
            return result.get('exit_code', 3)
        console.print(f"✅ {command} finished, outputs in [cyan]{self.args.out}[/cyan]")
        return 0

    # Commands

    def generate(self) -> Dict[str, Any]:
        result = self._run("Generating corpus...", self.generator.execute, self.args.config, self.args.out,
                           self.args.seed)
        if result.get('status') == 'success':
            table = Table(title="Generated corpus")
            table.add_column("Item", style="cyan")
            table.add_column("Value", style="green")
            for key, value in result['summary'].items():
                table.add_row(key.replace('_', ' ').title(), str(value))
            console.print(table)
        return result

    def train(self) -> Dict[str, Any]:
        result = self._run("Training disruption model...", self.forecaster.train,
                           self.args.labeled or self._data('labeled_trips.csv'), self.args.out, self.args.seed,
                           features=self.args.features, test_fraction=self.args.test_fraction,
                           l2_lambda=self.args.l2, calibration_fraction=self.args.calibration_fraction)
        if result.get('status') == 'success':
            metrics = result['metrics']
            table = Table(title=f"Cross-entropy ({metrics['features']})")
            table.add_column("Model", style="cyan")
            table.add_column("Train", style="green")
            table.add_column("Calibration", style="green")
            table.add_column("Test", style="green")
            for model in ('raw', 'calibrated'):
                table.add_row(model, *(f"{metrics[model][key]:.5f}" if metrics[model][key] is not None else "-"
                                       for key in ('train_ce', 'calibration_ce', 'test_ce')))
            console.print(table)
        return result

    def evaluate(self) -> Dict[str, Any]:
        result = self._run("Evaluating model...", self.forecaster.evaluate, self.args.model,
                           self.args.labeled or [self._data('labeled_trips.csv')], self.args.out, self.args.seed)
        if result.get('status') == 'success':
            self._print_frame("Model evaluation", result['table'])
        return result

    def select_features(self) -> Dict[str, Any]:
        result = self._run("Ranking feature subsets...", self.forecaster.select_features,
                           self.args.labeled or self._data('labeled_trips.csv'), self.args.out, self.args.seed,
                           threads=self.args.threads, candidates=self.args.candidates,
                           test_fraction=self.args.test_fraction, l2_lambda=self.args.l2)
        if result.get('status') == 'success':
            self._print_frame("Best feature sets", result['table'].head(10))
        return result

    def permutation_test(self) -> Dict[str, Any]:
        result = self._run("Running permutation tests...", self.forecaster.permutation_test,
                           self.args.labeled or self._data('labeled_trips.csv'), self.args.out, self.args.seed,
                           n_perm=self.args.n_perm)
        if result.get('status') == 'success':
            self._print_frame("Pairwise p-values", result['matrix'].round(4).reset_index())
        return result

    def simulate(self) -> Dict[str, Any]:
        policy, _ = load_run_config(self.args.config)
        chains_dir = self.args.chains_dir
        if chains_dir is None and self.args.model is None:
            chains_dir = self._data('truth_chains')
        result = self._run("Simulating...", self.simulator.execute, self.args.data, self.args.plan,
                           self.args.out, self.args.seed, policy=policy, k=self.args.k, day=self.args.day,
                           chains_dir=chains_dir, model_path=self.args.model,
                           context_path=self.args.context or self._data('trip_context.csv'),
                           ridership_path=self.args.ridership or self._data('ridership.csv'),
                           n_chains=self.args.chains)
        if result.get('status') == 'success':
            summary = result['summary']
            console.print(Panel(
                f"Plan: {', '.join(summary['plan']['assignments'])}\n"
                f"Mean cost: {summary['mean_cost']:.3f} ± {summary['std_error']:.3f}\n"
                f"Deadhead: {summary['deadhead_miles']:.2f} mi, {summary['deadhead_minutes']:.2f} min\n"
                f"Left behind: {summary['left_behind']:.2f}",
                title="Simulation", style="bold green"))
        return result

    def optimize(self) -> Dict[str, Any]:
        policy, annealing = load_run_config(self.args.config)
        overrides = {'n_iters': self.args.iters, 'initial_temp': self.args.temp, 'gamma': self.args.gamma,
                     'cooling': self.args.cooling}
        annealing.update({key: value for key, value in overrides.items() if value is not None})
        result = self._run("Optimizing stationing plan...", self.optimizer.execute, self.args.data,
                           self.args.model, self.args.context or self._data('trip_context.csv'),
                           self.args.ridership or self._data('ridership.csv'), self.args.out, self.args.seed,
                           k=self.args.k, n_chains=self.args.chains, annealing=annealing, policy=policy,
                           threads=self.args.threads, days=self.args.day,
                           baselines_only=self.args.baselines_only)
        if result.get('status') == 'success':
            self._print_frame("Plan comparison", result['report'].comparison_frame())
            report = self.reporter.execute(self.args.out, optimization=result['report'])
            self._display_completion(result['winner'], result['plan'], report)
        return result

    def replay(self) -> Dict[str, Any]:
        policy, _ = load_run_config(self.args.config)
        result = self._run("Replaying plans on ground truth...", self.replayer.execute, self.args.data,
                           self.args.plan, self.args.chains_dir or self._data('truth_chains'), self.args.out,
                           self.args.seed, policy=policy, day=self.args.day, threads=self.args.threads,
                           include_baselines=not self.args.no_baselines)
        if result.get('status') == 'success':
            self._print_frame("Replay", result['table'])
            self.reporter.execute(self.args.out, replay=result['table'])
        return result

    # Display helpers

    def _print_frame(self, title: str, frame):
        table = Table(title=title)
        for column in frame.columns:
            table.add_column(str(column), style="cyan" if column == frame.columns[0] else "green")
        for row in frame.itertuples(index=False):
            table.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
        console.print(table)

    def _display_completion(self, winner: str, plan: List[str], report: Dict[str, Any]):
        console.print(Panel(
            f"🚌 Recommended plan: [bold]{winner}[/bold]\n"
            f"📍 Stations: {', '.join(plan) or 'none'}\n"
            f"📋 Report: [cyan]{report.get('filename', 'not written')}[/cyan]",
            title="Stationing complete",
            style="bold green"
        ))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=Config.SEED, help="master seed")
    common.add_argument('--threads', type=int, default=Config.THREADS, help="worker cap")
    common.add_argument('--out', default=Config.OUT_DIR, help="output directory")

    corpus = argparse.ArgumentParser(add_help=False)
    corpus.add_argument('--data', default='data', help="corpus directory written by gen")
    corpus.add_argument('--day', help="service date (default: the latest in the schedule)")
    corpus.add_argument('--config', help="YAML/TOML file with policy and annealing sections")

    parser = argparse.ArgumentParser(description="Substitute bus stationing under forecast disruptions")
    commands = parser.add_subparsers(dest='command', required=True)

    # no shared parent: an absent --seed keeps the seed written in the config
    gen = commands.add_parser('gen', help="generate a synthetic corpus")
    gen.add_argument('--config', required=True, help="generator config (YAML or TOML)")
    gen.add_argument('--seed', type=int, help="overrides the config seed")
    gen.add_argument('--out', default=Config.OUT_DIR, help="output directory")
    gen.add_argument('--threads', type=int, default=Config.THREADS, help="worker cap (generation is single-threaded)")

    forecast = commands.add_parser('forecast', help="disruption forecasting")
    forecast_commands = forecast.add_subparsers(dest='forecast_command', required=True)
    labeled = argparse.ArgumentParser(add_help=False)
    labeled.add_argument('--data', default='data', help="corpus directory written by gen")
    labeled.add_argument('--test-fraction', type=float, default=0.2)
    labeled.add_argument('--l2', type=float, default=1e-4, help="L2 penalty")

    train = forecast_commands.add_parser('train', parents=[common, labeled])
    train.add_argument('--labeled', help="labeled trips CSV")
    train.add_argument('--features', nargs='+', help="feature names (default: all but year)")
    train.add_argument('--calibration-fraction', type=float, default=0.25,
                       help="share of the training split held out to fit the calibrator")

    evaluate = forecast_commands.add_parser('eval', parents=[common])
    evaluate.add_argument('--data', default='data')
    evaluate.add_argument('--model', required=True)
    evaluate.add_argument('--labeled', nargs='+', help="one or more labeled trips CSVs")

    select = forecast_commands.add_parser('select-features', parents=[common, labeled])
    select.add_argument('--labeled')
    select.add_argument('--candidates', nargs='+', help="categorical features to search over")

    perm = forecast_commands.add_parser('perm-test', parents=[common])
    perm.add_argument('--data', default='data')
    perm.add_argument('--labeled')
    perm.add_argument('--n-perm', type=int, default=9999)

    simulate = commands.add_parser('simulate', parents=[common, corpus], help="simulate one plan")
    simulate.add_argument('--plan', required=True, help="plan.json, or Garage / Hub / Agency")
    simulate.add_argument('--k', type=int, default=Config.SUBSTITUTES, help="buses for a baseline plan")
    simulate.add_argument('--chains-dir', help="directory of chain files (default: truth_chains)")
    simulate.add_argument('--model', help="sample chains from this model instead of reading them")
    simulate.add_argument('--context')
    simulate.add_argument('--ridership')
    simulate.add_argument('--chains', type=int, default=Config.CHAINS)

    optimize = commands.add_parser('optimize', parents=[common], help="search a stationing plan")
    optimize.add_argument('--data', default='data', help="corpus directory written by gen")
    optimize.add_argument('--config', help="YAML/TOML file with policy and annealing sections")
    optimize.add_argument('--day', action='append', help="service date; repeat to pool several days")
    optimize.add_argument('--model', required=True)
    optimize.add_argument('--context')
    optimize.add_argument('--ridership')
    optimize.add_argument('--k', type=int, default=Config.SUBSTITUTES)
    optimize.add_argument('--chains', type=int, default=Config.CHAINS)
    optimize.add_argument('--iters', type=int)
    optimize.add_argument('--temp', type=float)
    optimize.add_argument('--gamma', type=float)
    optimize.add_argument('--cooling', choices=['recursive', 'direct'])
    optimize.add_argument('--baselines-only', action='store_true')

    replay = commands.add_parser('replay', parents=[common, corpus], help="replay plans on ground truth")
    replay.add_argument('--plan', nargs='+', required=True, help="plan.json files")
    replay.add_argument('--chains-dir', help="ground-truth chains (default: truth_chains)")
    replay.add_argument('--no-baselines', action='store_true')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1

    setup_logging()
    try:
        check_config()
        return StationingOrchestrator(args).run()
    except KeyboardInterrupt:
        err_console.print("\n🛑 Interrupted by user")
        return 1
    except TransitError as e:
        err_console.print(f"❌ {type(e).__name__}: {e}", style="bold red")
        return e.exit_code
    except Exception as e:
        err_console.print(f"\n💥 {type(e).__name__}: {e}", style="bold red")
        logger.exception("Unexpected error in main execution")
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
