# simulator/costs.py
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from utils.errors import InvariantViolation


@dataclass(frozen=True)
class CostBreakdown:
    """Deadhead miles D, deadhead minutes T and left-behind counts L(j) of one day"""

    deadhead_miles: float = 0.0
    deadhead_minutes: float = 0.0
    left_behind_per_stop: Dict[str, int] = field(default_factory=dict)
    weights: Tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.deadhead_miles < 0 or self.deadhead_minutes < 0:
            raise InvariantViolation("Deadhead accumulators must be nonnegative")
        if any(count < 0 for count in self.left_behind_per_stop.values()):
            raise InvariantViolation("Left-behind counts must be nonnegative")

    @property
    def left_behind(self) -> int:
        return sum(self.left_behind_per_stop.values())

    def total(self, w_T: Optional[float] = None, w_L: Optional[float] = None) -> float:
        """D + w_T*T + w_L*sum(L); weights default to the ones the day was simulated with"""
        w_T = self.weights[0] if w_T is None else w_T
        w_L = self.weights[1] if w_L is None else w_L
        return self.deadhead_miles + w_T * self.deadhead_minutes + w_L * self.left_behind

    def to_dict(self) -> Dict:
        return {
            'deadhead_miles': self.deadhead_miles,
            'deadhead_minutes': self.deadhead_minutes,
            'left_behind': self.left_behind,
            'left_behind_per_stop': dict(sorted(self.left_behind_per_stop.items())),
            'total': self.total(),
        }
