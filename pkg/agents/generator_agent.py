# agents/generator_agent.py
import logging
from datetime import datetime
from typing import Any, Dict, Optional

from agents.base import BaseAgent
from config.settings import load_config_file
from scenarios.generator import GeneratorConfig, write_corpus

logger = logging.getLogger(__name__)


class GeneratorAgent(BaseAgent):
    """Writes a synthetic corpus: network, labeled history, ridership and truth chains"""

    def __init__(self, name: str = "GeneratorAgent"):
        super().__init__(name)

    def execute(self, config_path: str, out_dir: str, seed: Optional[int] = None) -> Dict[str, Any]:
        logger.info(f"{self.name}: Generating corpus from {config_path}...")
        started = datetime.now()
        try:
            values = load_config_file(config_path)
            if seed is not None:
                values['seed'] = seed
            cfg = GeneratorConfig.from_dict(values)
            corpus = write_corpus(cfg, out_dir)
            manifest = self._write_manifest('gen', cfg.to_dict(), cfg.seed, [config_path], corpus.files,
                                            out_dir, started)

            positives = sum(row.label for row in corpus.history.trips)
            logger.info(f"{self.name}: Corpus ready in {out_dir}")
            return {
                'status': 'success',
                'out_dir': out_dir,
                'files': corpus.files,
                'manifest': manifest,
                'summary': {
                    'stops': len(corpus.schedule.stops),
                    'trips': len(corpus.schedule.trips),
                    'service_days': len(corpus.schedule.service_dates()),
                    'labeled_trips': len(corpus.history.trips),
                    'disruptions': positives,
                    'candidates': len(corpus.schedule.candidate_stationing_stops),
                    'target_day': corpus.target_day.isoformat(),
                },
                'timestamp': self._get_timestamp(),
            }
        except Exception as e:
            return self._failure(e)
