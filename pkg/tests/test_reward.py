"""Test the reward terms and the per-frame rewarder."""

import sys
import os
import math

import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from core.model import FrameResult, RewardConfig, ThermalConfig  # noqa: E402
from reward.reward import (  # noqa: E402
    FrameRewarder,
    SlackWindow,
    combined_reward,
    temp_reward,
    time_reward,
)

BUDGET = 400.0

# (slack_norm, sigma_norm, p, expected time reward)
TIME_CASES = [
    (0.1, 0.0, 2.0, math.tanh(0.1) + 1.0),
    (0.5, 0.0, 2.0, math.tanh(0.5) + 1.0),
    (1.0, 0.0, 2.0, math.tanh(1.0) + 1.0),
    (2.0, 0.0, 2.0, math.tanh(2.0) + 1.0),
    (0.1, 0.1, 2.0, math.tanh(0.1) + 1.0 / 1.1),
    (0.1, 0.5, 2.0, math.tanh(0.1) + 1.0 / 1.5),
    (0.1, 1.0, 2.0, math.tanh(0.1) + 0.5),
    (0.25, 0.25, 3.0, math.tanh(0.25) + 0.8),
    (0.75, 0.05, 1.0, math.tanh(0.75) + 1.0 / 1.05),
    (0.01, 0.0, 2.0, math.tanh(0.01) + 1.0),
    (0.001, 0.2, 2.0, math.tanh(0.001) + 1.0 / 1.2),
    (3.0, 3.0, 2.0, math.tanh(3.0) + 0.25),
    (0.3, 0.0, 0.5, math.tanh(0.3) + 1.0),
    (0.6, 0.4, 5.0, math.tanh(0.6) + 1.0 / 1.4),
    (1.5, 0.0, 2.0, math.tanh(1.5) + 1.0),
    (0.2, 2.0, 2.0, math.tanh(0.2) + 1.0 / 3.0),
    (0.0, 0.0, 2.0, 0.0),
    (0.0, 0.5, 2.0, 0.0),
    (-0.25, 0.0, 2.0, -0.5),
    (-0.25, 1.0, 2.0, -0.5),
    (-0.1, 0.0, 2.0, -0.2),
    (-0.5, 0.0, 2.0, -1.0),
    (-1.0, 0.0, 2.0, -2.0),
    (-0.5, 0.0, 3.0, -1.5),
    (-0.2, 0.0, 0.5, -0.1),
    (-2.0, 0.3, 1.0, -2.0),
    (-0.05, 0.0, 4.0, -0.2),
    (-0.75, 0.0, 2.0, -1.5),
    (-0.01, 0.0, 2.0, -0.02),
    (-1.5, 0.0, 10.0, -15.0),
]

# (cpu, gpu, thres, p, expected)
TEMP_CASES = [
    (50, 60, 70, 2.0, 1.0),
    (75, 60, 70, 2.0, -2.0),
    (70, 70, 70, 2.0, 1.0),
    (60, 75, 70, 2.0, -2.0),
    (71, 71, 70, 2.0, -2.0),
    (70.0001, 20, 70, 2.0, -2.0),
    (20, 20, 70, 3.0, 1.0),
    (90, 20, 70, 3.0, -3.0),
    (-5, 0, 65, 1.0, 1.0),
    (66, 64, 65, 0.5, -0.5),
]

# (slack_norm, sigma_norm, (cpu, gpu), lambda, p, expected)
COMBINED_CASES = [
    (0.1, 0.0, (50, 60), 1.0, 2.0, math.tanh(0.1) + 2.0),
    (-0.25, 0.0, (75, 75), 1.0, 2.0, -2.5),
    (-0.25, 0.0, (50, 50), 1.0, 2.0, 0.5),
    (0.1, 0.0, (75, 50), 1.0, 2.0, math.tanh(0.1) + 1.0 - 2.0),
    (0.5, 0.5, (50, 50), 0.5, 2.0, math.tanh(0.5) + 1.0 / 1.5 + 0.5),
    (0.0, 0.0, (80, 80), 2.0, 2.0, -4.0),
    (0.2, 0.0, (80, 80), 0.0, 2.0, math.tanh(0.2) + 1.0),
    (-0.5, 0.0, (80, 80), 0.0, 2.0, -1.0),
    (1.0, 1.0, (70, 70), 1.0, 3.0, math.tanh(1.0) + 0.5 + 1.0),
    (-1.0, 0.0, (71, 69), 0.25, 4.0, -4.0 - 1.0),
]

THRES = 70.0


def test_time_reward_table():
    """Time reward over both branches and the zero-slack boundary."""
    for slack, sigma, p, expected in TIME_CASES:
        got = time_reward(slack * BUDGET, sigma * BUDGET, p, BUDGET)
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-12), (slack, sigma, p)
    print(f"[OK] {len(TIME_CASES)} time reward cases")


def test_temp_reward_table():
    for cpu, gpu, thres, p, expected in TEMP_CASES:
        assert temp_reward(cpu, gpu, thres, p) == expected, (cpu, gpu, thres, p)
    print(f"[OK] {len(TEMP_CASES)} temperature reward cases")


def test_combined_reward_table():
    for slack, sigma, temps, lam, p, expected in COMBINED_CASES:
        cfg = RewardConfig(lam=lam, penalty_p=p)
        got = combined_reward(slack * BUDGET, sigma * BUDGET, temps, cfg, BUDGET, THRES)
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-12), (slack, temps, lam)
    assert len(TIME_CASES) + len(TEMP_CASES) + len(COMBINED_CASES) == 50
    print(f"[OK] {len(COMBINED_CASES)} combined reward cases")


def test_combined_reward_lambda_zero_is_time_reward():
    for slack, sigma, p, _ in TIME_CASES:
        cfg = RewardConfig(lam=0.0, penalty_p=p)
        assert combined_reward(slack * BUDGET, sigma * BUDGET, (99, 99), cfg, BUDGET, THRES) \
            == time_reward(slack * BUDGET, sigma * BUDGET, p, BUDGET)
    print("[OK] lambda = 0 gives the time reward exactly")


def test_time_reward_properties():
    """Bounded by 2, increasing in slack, non-increasing in sigma."""
    slacks = [-300, -100, -1, 1, 10, 100, 300, 4000]
    values = [time_reward(s, 0.0, 2.0, BUDGET) for s in slacks]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert all(v <= 2.0 for v in values)
    sigmas = [0, 1, 10, 100, 1000]
    values = [time_reward(50, s, 2.0, BUDGET) for s in sigmas]
    assert all(a >= b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        time_reward(10, -1, 2.0, BUDGET)
    with pytest.raises(ValueError):
        temp_reward(10, 10, 70, 0)
    print("[OK] Time reward properties")


def test_slack_window():
    window = SlackWindow(3)
    assert window.sigma() == 0.0
    window.push(10)
    assert window.sigma() == 0.0
    for _ in range(5):
        window.push(7.5)
    assert len(window) == 3
    assert window.sigma() == 0.0
    window.push(10.5)
    # contents 7.5, 7.5, 10.5 -> population std sqrt(2)
    assert window.sigma() == pytest.approx(math.sqrt(2.0))
    with pytest.raises(ValueError):
        SlackWindow(1)
    print("[OK] Slack window")


def test_frame_rewarder_timing():
    """Even reward uses mid-frame temps, odd reward end-of-frame temps."""
    thermal = ThermalConfig(70, 80, 5)
    rewarder = FrameRewarder(RewardConfig(), thermal, BUDGET)
    result = FrameResult(300, 60, 360, 100, 75.0, 60.0)
    r_even, r_odd = rewarder.score(result, (50.0, 50.0))
    slack_term = math.tanh(40 / BUDGET) + 1.0
    assert r_even == pytest.approx(slack_term + 1.0)
    assert r_odd == pytest.approx(slack_term - 2.0)

    late = FrameResult(400, 100, 500, 100, 50.0, 50.0)
    r_even, r_odd = rewarder.score(late, (50.0, 50.0))
    assert r_even == pytest.approx(2.0 * (-100 / BUDGET) + 1.0)
    assert r_even == r_odd
    print("[OK] Frame rewarder timing")


if __name__ == "__main__":
    test_time_reward_table()
    test_temp_reward_table()
    test_combined_reward_table()
    test_combined_reward_lambda_zero_is_time_reward()
    test_time_reward_properties()
    test_slack_window()
    test_frame_rewarder_timing()
