# simulator/chains.py
"""Sampled days: ridership counts and disruption events per trip."""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from transit_data.schedule import Schedule
from utils.errors import DataError
from utils.seeding import substream
from utils.schemas import read_artifact, validate_artifact

logger = logging.getLogger(__name__)

RIDERSHIP_COLUMNS = ['trip_id', 'stop_id', 'mean_boarding', 'mean_alighting']

TripStop = Tuple[str, str]


class InconsistentChain(DataError):
    pass


class InvalidProbability(DataError):
    pass


@dataclass(frozen=True)
class Chain:
    """One joint realization of ridership and disruptions for a service day"""

    chain_id: int
    boarding: Dict[TripStop, int] = field(default_factory=dict)
    alighting: Dict[TripStop, int] = field(default_factory=dict)
    disruptions: Tuple[Tuple[str, int], ...] = ()

    def disruption_seq(self, trip_id: str) -> Optional[int]:
        for tid, seq in self.disruptions:
            if tid == trip_id:
                return seq
        return None

    def validate(self, schedule: Schedule) -> 'Chain':
        """Check references, flow conservation and disruption bounds"""
        for (trip_id, stop_id), count in list(self.boarding.items()) + list(self.alighting.items()):
            trip = schedule.trips.get(trip_id)
            if trip is None:
                raise InconsistentChain(f"chain {self.chain_id}: unknown trip {trip_id!r}")
            if stop_id not in {st.stop_id for st in trip.stop_times}:
                raise InconsistentChain(f"chain {self.chain_id}: stop {stop_id!r} not on trip {trip_id!r}")
            if count < 0:
                raise InconsistentChain(f"chain {self.chain_id}: negative count at ({trip_id}, {stop_id})")

        for trip_id in {tid for tid, _ in self.boarding} | {tid for tid, _ in self.alighting}:
            load = 0
            seen = set()
            for st in schedule.trips[trip_id].stop_times:
                if st.stop_id in seen:
                    continue
                seen.add(st.stop_id)
                load -= self.alighting.get((trip_id, st.stop_id), 0)
                if load < 0:
                    raise InconsistentChain(f"chain {self.chain_id}: trip {trip_id!r} alights more than onboard")
                load += self.boarding.get((trip_id, st.stop_id), 0)
            if load != 0:
                raise InconsistentChain(f"chain {self.chain_id}: trip {trip_id!r} ends with {load} onboard")

        seen_trips = set()
        for trip_id, seq in self.disruptions:
            if trip_id in seen_trips:
                raise InconsistentChain(f"chain {self.chain_id}: more than one disruption on {trip_id!r}")
            seen_trips.add(trip_id)
            trip = schedule.trips.get(trip_id)
            if trip is None or not 0 <= seq < len(trip.stop_times):
                raise InconsistentChain(f"chain {self.chain_id}: disruption ({trip_id}, {seq}) out of bounds")
        return self

    def to_dict(self) -> Dict:
        return {
            'chain_id': self.chain_id,
            'boarding': [[t, s, c] for (t, s), c in sorted(self.boarding.items())],
            'alighting': [[t, s, c] for (t, s), c in sorted(self.alighting.items())],
            'disruptions': [[t, seq] for t, seq in self.disruptions],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Chain':
        return cls(
            chain_id=int(data['chain_id']),
            boarding={(t, s): int(c) for t, s, c in data['boarding']},
            alighting={(t, s): int(c) for t, s, c in data['alighting']},
            disruptions=tuple((t, int(seq)) for t, seq in data['disruptions']),
        )


def write_chain(chain: Chain, path: str) -> str:
    document = chain.to_dict()
    validate_artifact(document, 'chain')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2)
    return path


def read_chain(path: str) -> Chain:
    return Chain.from_dict(read_artifact(path, 'chain'))


def read_chain_dir(dir_path: str) -> List[Chain]:
    """All ``chain*.json`` files of a directory, ordered by chain id"""
    if not os.path.isdir(dir_path):
        raise DataError(f"Chain directory not found: {dir_path}")
    chains = [read_chain(os.path.join(dir_path, name))
              for name in sorted(os.listdir(dir_path)) if name.startswith('chain') and name.endswith('.json')]
    if not chains:
        raise DataError(f"No chain files in {dir_path}")
    return sorted(chains, key=lambda c: c.chain_id)


@dataclass(frozen=True)
class RidershipParams:
    """Mean boarding and alighting per (trip, stop); absent pairs mean zero"""

    boarding: Dict[TripStop, float] = field(default_factory=dict)
    alighting: Dict[TripStop, float] = field(default_factory=dict)


def write_ridership_params(params: RidershipParams, path: str) -> str:
    keys = sorted(set(params.boarding) | set(params.alighting))
    pd.DataFrame([{
        'trip_id': t, 'stop_id': s,
        'mean_boarding': repr(float(params.boarding.get((t, s), 0.0))),
        'mean_alighting': repr(float(params.alighting.get((t, s), 0.0))),
    } for t, s in keys], columns=RIDERSHIP_COLUMNS).to_csv(path, index=False, lineterminator='\n')
    return path


def read_ridership_params(path: str) -> RidershipParams:
    if not os.path.exists(path):
        raise DataError(f"Ridership file not found: {path}")
    frame = pd.read_csv(path, dtype={'trip_id': str, 'stop_id': str}, keep_default_na=False)
    if list(frame.columns) != RIDERSHIP_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(RIDERSHIP_COLUMNS)}")
    boarding, alighting = {}, {}
    for row in frame.itertuples(index=False):
        if row.mean_boarding > 0:
            boarding[(row.trip_id, row.stop_id)] = float(row.mean_boarding)
        if row.mean_alighting > 0:
            alighting[(row.trip_id, row.stop_id)] = float(row.mean_alighting)
    return RidershipParams(boarding, alighting)


def _sample_one(schedule: Schedule, trip_ids: Sequence[str], probs: Dict[str, float],
                params: RidershipParams, chain_id: int, rng: np.random.Generator) -> Chain:
    boarding: Dict[TripStop, int] = {}
    alighting: Dict[TripStop, int] = {}
    disruptions: List[Tuple[str, int]] = []

    for trip_id in trip_ids:
        trip = schedule.trips[trip_id]
        stops = []
        for st in trip.stop_times:
            if st.stop_id not in stops:
                stops.append(st.stop_id)
        load = 0
        for i, stop_id in enumerate(stops):
            key = (trip_id, stop_id)
            last = i == len(stops) - 1
            # alighting is capped by the current load; everyone leaves at the last stop
            off = load if last else min(load, int(rng.poisson(params.alighting.get(key, 0.0))))
            on = 0 if last else int(rng.poisson(params.boarding.get(key, 0.0)))
            load += on - off
            if off:
                alighting[key] = off
            if on:
                boarding[key] = on
        if rng.random() < probs.get(trip_id, 0.0):
            disruptions.append((trip_id, int(rng.integers(len(trip.stop_times)))))

    return Chain(chain_id, boarding, alighting, tuple(disruptions))


def sample_chains(
    schedule: Schedule,
    disruption_probs: Dict[str, float],
    ridership_params: RidershipParams,
    n_chains: int,
    seed: int,
) -> List[Chain]:
    """Independent chains; chain i draws from substream (seed, i)"""
    if n_chains < 1:
        raise DataError("n_chains must be >= 1")
    for trip_id, p in disruption_probs.items():
        if not 0.0 <= p <= 1.0 or p != p:
            raise InvalidProbability(f"Disruption probability of {trip_id!r} is {p}, outside [0, 1]")
    trip_ids = sorted(schedule.trips)
    chains = [_sample_one(schedule, trip_ids, disruption_probs, ridership_params, i, substream(seed, i))
              for i in range(n_chains)]
    logger.info(f"Sampled {n_chains} chains over {len(trip_ids)} trips, "
                f"{sum(len(c.disruptions) for c in chains)} disruptions in total")
    return chains
