"""
Domain types shared by the simulator, agent, governors, protocol and bench.

All types are frozen dataclasses validated at construction time, so any
value that exists is a valid one.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

FEATURE_COUNT = 7
TEMP_SCALE_C = 100.0
DEFAULT_P_MAX = 1000


class Stage(Enum):
    FRAME_START = "frame_start"
    AFTER_RPN = "after_rpn"


class Parity(Enum):
    EVEN = "even"
    ODD = "odd"


def parity_for(stage):
    return Parity.EVEN if stage is Stage.FRAME_START else Parity.ODD


# -------------------------------
# Configuration Values
# -------------------------------

@dataclass(frozen=True)
class FrequencyTable:
    cpu_levels: Tuple[float, ...]
    gpu_levels: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "cpu_levels", tuple(float(f) for f in self.cpu_levels))
        object.__setattr__(self, "gpu_levels", tuple(float(f) for f in self.gpu_levels))
        for name, levels in (("cpu", self.cpu_levels), ("gpu", self.gpu_levels)):
            if len(levels) < 2:
                raise ValueError(f"{name} table needs at least 2 levels")
            if any(f <= 0 for f in levels):
                raise ValueError(f"{name} frequencies must be positive")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError(f"{name} levels must be strictly increasing")

    @property
    def m(self):
        return len(self.cpu_levels)

    @property
    def n(self):
        return len(self.gpu_levels)

    @property
    def size(self):
        return self.m * self.n

    def max_action(self):
        return Action(self.m - 1, self.n - 1)


@dataclass(frozen=True)
class LatencyConstraint:
    budget_ms: float

    def __post_init__(self):
        if not self.budget_ms > 0:
            raise ValueError("budget_ms must be positive")


@dataclass(frozen=True)
class ThermalConfig:
    threshold_c: float
    throttle_c: float
    hysteresis_c: float

    def __post_init__(self):
        if not self.threshold_c < self.throttle_c:
            raise ValueError("threshold_c must be below throttle_c")
        if not self.hysteresis_c > 0:
            raise ValueError("hysteresis_c must be positive")

    def overheated(self, cpu_temp, gpu_temp):
        return cpu_temp > self.threshold_c or gpu_temp > self.threshold_c


@dataclass(frozen=True)
class RewardConfig:
    lam: float = 1.0
    penalty_p: float = 2.0
    window_n: int = 10

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not self.penalty_p > 0:
            raise ValueError("penalty_p must be positive")
        if self.window_n < 2:
            raise ValueError("window_n must be at least 2")

    @classmethod
    def from_dict(cls, d):
        return cls(lam=d["lambda"], penalty_p=d["penalty_p"], window_n=d["window_n"])


@dataclass(frozen=True)
class ObjectiveWeights:
    alpha: float = 0.01
    beta: float = 100.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("objective weights must be non-negative")


# -------------------------------
# Decisions and Observations
# -------------------------------

@dataclass(frozen=True)
class Action:
    cpu_level: int
    gpu_level: int

    def __post_init__(self):
        if self.cpu_level < 0 or self.gpu_level < 0:
            raise ValueError("action levels must be non-negative")

    def check(self, table):
        if self.cpu_level >= table.m or self.gpu_level >= table.n:
            raise ValueError(f"action {self} outside {table.m}x{table.n} table")
        return self


@dataclass(frozen=True)
class Observation:
    stage: Stage
    cpu_temp: float
    gpu_temp: float
    cpu_level: int
    gpu_level: int
    slack_ms: float
    proposals: Optional[int] = None

    def __post_init__(self):
        if (self.proposals is not None) != (self.stage is Stage.AFTER_RPN):
            raise ValueError("proposals present if and only if stage is AFTER_RPN")
        if self.proposals is not None and self.proposals < 0:
            raise ValueError("proposals must be non-negative")
        if not (math.isfinite(self.cpu_temp) and math.isfinite(self.gpu_temp)):
            raise ValueError("temperatures must be finite")

    @property
    def levels(self):
        return Action(self.cpu_level, self.gpu_level)


@dataclass(frozen=True)
class Transition:
    state: Observation
    action: Action
    reward: float
    next_state: Observation
    parity: Parity

    def __post_init__(self):
        if self.parity is not parity_for(self.state.stage):
            raise ValueError(
                f"parity {self.parity.value} does not match stage {self.state.stage.value}"
            )


@dataclass(frozen=True)
class FrameResult:
    """Outcome of one inference frame as reported by a device."""

    stage1_ms: float
    stage2_ms: float
    total_ms: float
    proposals: int
    cpu_temp: float
    gpu_temp: float


# -------------------------------
# Encodings
# -------------------------------

def action_to_index(action, table):
    action.check(table)
    return action.cpu_level * table.n + action.gpu_level


def index_to_action(index, table):
    if not 0 <= index < table.size:
        raise ValueError(f"action index {index} outside [0, {table.size})")
    cpu, gpu = divmod(int(index), table.n)
    return Action(cpu, gpu)


def normalize_observation(obs, table, constraint, p_max=DEFAULT_P_MAX):
    """
    Scale an observation into the 7-feature network input.

    Order: stage, cpu_temp, gpu_temp, cpu_level, gpu_level, slack, proposals.
    Slack keeps its sign; nothing is clamped.
    """
    stage = 0.0 if obs.stage is Stage.FRAME_START else 1.0
    proposals = 0.0 if obs.proposals is None else obs.proposals / p_max
    return np.array(
        [
            stage,
            obs.cpu_temp / TEMP_SCALE_C,
            obs.gpu_temp / TEMP_SCALE_C,
            obs.cpu_level / (table.m - 1),
            obs.gpu_level / (table.n - 1),
            obs.slack_ms / constraint.budget_ms,
            proposals,
        ],
        dtype=np.float64,
    )
