import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Tuple

import yaml
from dotenv import load_dotenv

from utils.errors import ConfigError, DataError

load_dotenv()

TOOL_VERSION = "0.3.0"


class Config:
    # Run defaults
    SEED = int(os.getenv('TRANSIT_SEED', '0'))
    THREADS = int(os.getenv('TRANSIT_THREADS', '1'))
    OUT_DIR = os.getenv('TRANSIT_OUT_DIR', 'out')

    # Logging
    LOG_LEVEL = os.getenv('TRANSIT_LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('TRANSIT_LOG_FILE', 'transit_stationing.log')

    # Stationing search (number of substitutes, chains, iterations, temperature)
    SUBSTITUTES = int(os.getenv('TRANSIT_SUBSTITUTES', '5'))
    CHAINS = int(os.getenv('TRANSIT_CHAINS', '100'))
    SA_ITERS = int(os.getenv('TRANSIT_SA_ITERS', '500'))
    SA_TEMP = float(os.getenv('TRANSIT_SA_TEMP', '100.0'))
    SA_GAMMA = float(os.getenv('TRANSIT_SA_GAMMA', '1.0'))

    # Simulator policy
    PATIENCE_S = int(os.getenv('TRANSIT_PATIENCE_S', '1800'))
    ARRIVAL_WINDOW_S = int(os.getenv('TRANSIT_ARRIVAL_WINDOW_S', '600'))
    OVERAGE_FRACTION = float(os.getenv('TRANSIT_OVERAGE_FRACTION', '0.05'))
    HORIZON_START_S = int(os.getenv('TRANSIT_HORIZON_START_S', '21600'))
    HORIZON_END_S = int(os.getenv('TRANSIT_HORIZON_END_S', '46800'))


def check_config(config: Config = None):
    """Validate the environment-driven defaults"""
    config = config or Config()
    problems = []

    for var in ('THREADS', 'SUBSTITUTES', 'CHAINS'):
        if getattr(config, var) < 1:
            problems.append(f"{var} must be >= 1")
    if config.SA_ITERS < 0:
        problems.append("SA_ITERS must be >= 0")
    if config.SA_TEMP <= 0:
        problems.append("SA_TEMP must be > 0")
    if config.SA_GAMMA <= 0:
        problems.append("SA_GAMMA must be > 0")
    if config.PATIENCE_S <= 0 or config.ARRIVAL_WINDOW_S < 0:
        problems.append("PATIENCE_S must be > 0 and ARRIVAL_WINDOW_S >= 0")
    if not 0.0 <= config.OVERAGE_FRACTION <= 1.0:
        problems.append("OVERAGE_FRACTION must lie in [0, 1]")
    if config.HORIZON_START_S >= config.HORIZON_END_S:
        problems.append("HORIZON_START_S must be before HORIZON_END_S")

    if problems:
        raise ConfigError(f"Invalid configuration: {problems}")
    return True


def from_mapping(cls, values: Dict[str, Any]):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown {cls.__name__} keys: {unknown}")
    return cls(**values)


@dataclass(frozen=True)
class PolicyConfig:
    """Dispatch policy and passenger behaviour of the day simulator"""

    overage_dispatch_fraction: float = Config.OVERAGE_FRACTION
    patience_s: float = Config.PATIENCE_S
    arrival_window_s: float = Config.ARRIVAL_WINDOW_S
    horizon: Tuple[float, float] = (Config.HORIZON_START_S, Config.HORIZON_END_S)
    # (w_T, w_L): weights of deadhead minutes and passengers left behind
    cost_weights: Tuple[float, float] = (1.0, 1.0)
    bus_capacity: int = None

    def __post_init__(self):
        object.__setattr__(self, 'horizon', tuple(self.horizon))
        object.__setattr__(self, 'cost_weights', tuple(self.cost_weights))
        if not 0.0 <= self.overage_dispatch_fraction <= 1.0:
            raise ConfigError("overage_dispatch_fraction must lie in [0, 1]")
        if self.patience_s <= 0 or self.arrival_window_s < 0:
            raise ConfigError("patience_s must be > 0 and arrival_window_s >= 0")
        if len(self.horizon) != 2 or self.horizon[0] >= self.horizon[1]:
            raise ConfigError(f"horizon must be [start, end] with start < end, got {self.horizon}")
        if len(self.cost_weights) != 2 or min(self.cost_weights) < 0:
            raise ConfigError("cost_weights must be two nonnegative numbers")
        if self.bus_capacity is not None and self.bus_capacity < 1:
            raise ConfigError("bus_capacity must be >= 1")

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> 'PolicyConfig':
        return from_mapping(cls, values or {})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class AnnealingConfig:
    """Simulated annealing settings; ``cooling`` is ``recursive`` or ``direct``"""

    n_iters: int = Config.SA_ITERS
    initial_temp: float = Config.SA_TEMP
    gamma: float = Config.SA_GAMMA
    seed: int = Config.SEED
    cooling: str = 'recursive'

    def __post_init__(self):
        if self.initial_temp <= 0:
            raise ConfigError("initial_temp must be > 0")
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if self.n_iters < 0:
            raise ConfigError("n_iters must be >= 0")
        if self.cooling not in ('recursive', 'direct'):
            raise ConfigError(f"cooling must be 'recursive' or 'direct', got {self.cooling!r}")

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> 'AnnealingConfig':
        return from_mapping(cls, values or {})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a YAML or TOML config file into a dict"""
    if not os.path.exists(path):
        raise DataError(f"Config file not found: {path}")
    try:
        if path.endswith('.toml'):
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        else:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
    except (yaml.YAMLError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"Could not parse config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping at top level")
    return data


def load_run_config(path: str = None) -> Tuple[PolicyConfig, Dict[str, Any]]:
    """Policy and annealing sections of a run config file; both optional"""
    data = load_config_file(path) if path else {}
    unknown = sorted(set(data) - {'policy', 'annealing'})
    if unknown:
        raise ConfigError(f"Unknown config sections: {unknown}")
    return PolicyConfig.from_dict(data.get('policy')), dict(data.get('annealing') or {})
