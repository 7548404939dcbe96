"""
Reward for the frequency agent: r = r_time + lambda * r_temp.

Slack and its recent standard deviation are divided by the latency budget
before use, so tanh stays in its responsive range for any budget.
"""

import math
from collections import deque

import numpy as np


class SlackWindow:
    """Ring buffer of the last n per-frame slack values (ms)."""

    def __init__(self, capacity):
        if capacity < 2:
            raise ValueError("window capacity must be at least 2")
        self._values = deque(maxlen=capacity)

    def push(self, slack_ms):
        self._values.append(float(slack_ms))

    def sigma(self):
        # population std-dev; undefined below two samples
        if len(self._values) < 2:
            return 0.0
        return float(np.std(np.fromiter(self._values, dtype=np.float64)))

    def __len__(self):
        return len(self._values)


def time_reward(slack_ms, sigma_ms, p, budget_ms):
    if p <= 0:
        raise ValueError("penalty multiplier must be positive")
    if sigma_ms < 0:
        raise ValueError("sigma must be non-negative")

    slack = slack_ms / budget_ms
    if slack > 0:
        return math.tanh(slack) + 1.0 / (1.0 + sigma_ms / budget_ms)
    return p * slack


def temp_reward(cpu_temp, gpu_temp, thres, p):
    if p <= 0:
        raise ValueError("penalty multiplier must be positive")
    if cpu_temp <= thres and gpu_temp <= thres:
        return 1.0
    return -p


def combined_reward(slack_ms, sigma_ms, temps, cfg, budget_ms, thres):
    cpu_temp, gpu_temp = temps
    r_time = time_reward(slack_ms, sigma_ms, cfg.penalty_p, budget_ms)
    if cfg.lam == 0:
        return r_time
    return r_time + cfg.lam * temp_reward(cpu_temp, gpu_temp, thres, cfg.penalty_p)


class FrameRewarder:
    """
    Scores a completed frame into its two half-step rewards.

    Both rewards use the full-frame slack. The even reward takes the
    temperatures seen after stage 1, the odd reward those at frame end.
    """

    def __init__(self, cfg, thermal, budget_ms):
        self.cfg = cfg
        self.thermal = thermal
        self.budget_ms = budget_ms
        self.window = SlackWindow(cfg.window_n)

    def score(self, result, mid_temps):
        slack = self.budget_ms - result.total_ms
        self.window.push(slack)
        sigma = self.window.sigma()

        def reward(temps):
            return combined_reward(
                slack, sigma, temps, self.cfg, self.budget_ms, self.thermal.threshold_c
            )

        return reward(mid_temps), reward((result.cpu_temp, result.gpu_temp))
