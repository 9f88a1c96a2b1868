"""Episode records shared by the tabular, policy-gradient and actor-critic code."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class Trajectory:
    """Ordered ``(observation, action, reward)`` steps.

    ``reward`` at step ``t`` is the reward received after taking the action at
    step ``t``. ``terminal_bootstrap_value`` is ``V(s_T)`` when the segment
    was cut before the episode ended, and ``None`` when it ended in a
    terminal state.
    """

    steps: list[tuple[Any, Any, float]] = field(default_factory=list)
    terminal_bootstrap_value: float | None = None

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a trajectory needs at least one step")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("trajectory rewards must be finite")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def observations(self) -> list:
        return [s[0] for s in self.steps]

    @property
    def actions(self) -> list:
        return [s[1] for s in self.steps]

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s[2] for s in self.steps], dtype=np.float64)

    @property
    def terminal(self) -> bool:
        return self.terminal_bootstrap_value is None
