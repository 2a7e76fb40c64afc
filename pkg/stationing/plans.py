# stationing/plans.py
import json
import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

from transit_data.schedule import Schedule
from utils.errors import ConfigError
from utils.schemas import read_artifact, validate_artifact

logger = logging.getLogger(__name__)


class Provenance(str, Enum):
    GARAGE = 'Garage'
    HUB = 'Hub'
    AGENCY = 'Agency'
    GREEDY = 'Greedy'
    SEARCH = 'Search'


# baselines may co-locate buses and use stops outside the candidate list
RELAXED_PROVENANCE = (Provenance.GARAGE, Provenance.HUB, Provenance.AGENCY)


class InfeasiblePlan(ConfigError):
    pass


class MissingAgencyPlan(ConfigError):
    pass


@dataclass(frozen=True)
class StationingPlan:
    """Where each of the k substitute buses waits"""

    assignments: Tuple[str, ...]
    provenance: Provenance = Provenance.SEARCH

    def __post_init__(self):
        object.__setattr__(self, 'assignments', tuple(self.assignments))
        object.__setattr__(self, 'provenance', Provenance(self.provenance))

    @property
    def k(self) -> int:
        return len(self.assignments)

    def validate(self, schedule: Schedule, k: Optional[int] = None) -> 'StationingPlan':
        if k is not None and self.k != k:
            raise InfeasiblePlan(f"Plan has {self.k} buses, expected {k}")
        for stop_id in self.assignments:
            if stop_id not in schedule.stops:
                raise InfeasiblePlan(f"Stationing stop {stop_id!r} is not in the schedule")
        if self.provenance in RELAXED_PROVENANCE:
            return self
        candidates = set(schedule.candidate_stationing_stops)
        outside = [s for s in self.assignments if s not in candidates]
        if outside:
            raise InfeasiblePlan(f"Stops {outside} are not stationing candidates")
        if len(set(self.assignments)) != self.k:
            raise InfeasiblePlan(f"Plan {list(self.assignments)} stations two buses at one stop")
        return self

    def replace(self, position: int, stop_id: str) -> 'StationingPlan':
        assignments = list(self.assignments)
        assignments[position] = stop_id
        return StationingPlan(tuple(assignments), self.provenance)

    def to_dict(self) -> Dict:
        return {'k': self.k, 'assignments': list(self.assignments), 'provenance': self.provenance.value}

    @classmethod
    def from_dict(cls, data: Dict) -> 'StationingPlan':
        plan = cls(tuple(data['assignments']), Provenance(data['provenance']))
        if plan.k != int(data['k']):
            raise InfeasiblePlan(f"plan.json declares k={data['k']} but lists {plan.k} stops")
        return plan


def baseline_plan(kind: Provenance, schedule: Schedule, k: int) -> StationingPlan:
    """Garage (all at depot), Hub (all at hub) or the agency's configured plan"""
    kind = Provenance(kind)
    if kind is Provenance.GARAGE:
        return StationingPlan((schedule.depot,) * k, kind)
    if kind is Provenance.HUB:
        return StationingPlan((schedule.hub,) * k, kind)
    if kind is Provenance.AGENCY:
        if schedule.agency_plan is None:
            raise MissingAgencyPlan("network.json has no agency_plan")
        return StationingPlan(tuple(schedule.agency_plan), kind)
    raise ConfigError(f"{kind.value} is not a baseline plan kind")


def save_plan(plan: StationingPlan, path: str) -> str:
    document = plan.to_dict()
    validate_artifact(document, 'plan')
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2)
    return path


def load_plan(path: str) -> StationingPlan:
    return StationingPlan.from_dict(read_artifact(path, 'plan'))
