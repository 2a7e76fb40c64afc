# agents/base.py
import logging
from datetime import datetime
from typing import Any, Dict, Iterable, Optional

from dateutil.parser import isoparse

from forecasting.pipeline import forecast_day, load_model, read_trip_context
from transit_data.schedule import Schedule
from utils.errors import ConfigError, TransitError, exit_code_for
from utils.manifest import RunManifest, write_manifest

logger = logging.getLogger(__name__)


class BaseAgent:
    """Shared plumbing: failure responses, manifests and service-day selection"""

    def __init__(self, name: str):
        self.name = name

    def _failure(self, error: BaseException) -> Dict[str, Any]:
        if isinstance(error, (TransitError, OSError)):
            logger.error(f"{self.name}: {type(error).__name__}: {error}")
        else:
            logger.exception(f"{self.name}: unexpected error")
        return {
            'status': 'error',
            'error': f"{type(error).__name__}: {error}",
            'exit_code': exit_code_for(error),
            'timestamp': self._get_timestamp(),
        }

    def _write_manifest(self, command: str, config: Dict[str, Any], seed: int, inputs: Iterable[str],
                        outputs: Iterable[str], out_dir: str, started: datetime) -> str:
        manifest = RunManifest(command=command, config=config, seed=seed, started_at=started.isoformat())
        manifest.add_inputs(inputs)
        manifest.add_outputs(outputs)
        manifest.finish(started)
        return write_manifest(manifest, out_dir)

    def _service_day(self, schedule: Schedule, day: Optional[str]) -> Schedule:
        """One day of the schedule: ``day`` if given, else the latest service date"""
        dates = schedule.service_dates()
        if not dates:
            return schedule
        if day is None:
            chosen = dates[-1]
        else:
            try:
                chosen = isoparse(day).date()
            except ValueError as e:
                raise ConfigError(f"Invalid service date {day!r}") from e
            if chosen not in dates:
                raise ConfigError(f"No trips on {chosen.isoformat()}; schedule covers "
                                  f"{dates[0].isoformat()} to {dates[-1].isoformat()}")
        logger.info(f"{self.name}: using service date {chosen.isoformat()}")
        return schedule.for_service_date(chosen)

    def _forecast(self, schedule: Schedule, model_path: str, context_path: str) -> Dict[str, float]:
        """Calibrated disruption probabilities of every trip of ``schedule``"""
        model, calibrator = load_model(model_path)
        return forecast_day(model, calibrator, schedule, read_trip_context(context_path))

    def _get_timestamp(self) -> str:
        return datetime.now().isoformat()
