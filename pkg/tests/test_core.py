"""Test domain types and encodings."""

import sys
import os

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from core.model import (  # noqa: E402
    Action,
    FrequencyTable,
    LatencyConstraint,
    Observation,
    Parity,
    RewardConfig,
    Stage,
    ThermalConfig,
    Transition,
    action_to_index,
    index_to_action,
    normalize_observation,
)


def _table(m, n):
    return FrequencyTable(tuple(range(100, 100 * (m + 1), 100)),
                          tuple(range(50, 50 * (n + 1), 50)))


def test_action_index_examples():
    """Flattening follows cpu * N + gpu."""
    table = _table(4, 3)
    assert action_to_index(Action(0, 0), table) == 0
    assert action_to_index(Action(3, 2), table) == 11
    assert action_to_index(Action(2, 1), table) == 7
    assert index_to_action(0, table) == Action(0, 0)
    assert index_to_action(11, table) == Action(3, 2)
    assert index_to_action(7, table) == Action(2, 1)
    print("[OK] Action index examples")


def test_action_index_bijection():
    """Index encoding is a bijection for every table size up to 32x32."""
    for m in range(2, 33):
        for n in range(2, 33):
            table = _table(m, n)
            for i in range(m * n):
                assert action_to_index(index_to_action(i, table), table) == i
    print("[OK] Action index bijection")


def test_action_index_out_of_bounds():
    table = _table(4, 3)
    with pytest.raises(ValueError):
        index_to_action(12, table)
    with pytest.raises(ValueError):
        action_to_index(Action(4, 0), table)
    with pytest.raises(ValueError):
        Action(-1, 0)
    print("[OK] Out-of-bounds actions rejected")


def test_table_validation():
    with pytest.raises(ValueError):
        FrequencyTable((100,), (100, 200))
    with pytest.raises(ValueError):
        FrequencyTable((200, 100), (100, 200))
    with pytest.raises(ValueError):
        FrequencyTable((0, 100), (100, 200))
    assert _table(4, 3).size == 12
    assert _table(4, 3).max_action() == Action(3, 2)
    print("[OK] Frequency table validation")


def test_config_types_validation():
    with pytest.raises(ValueError):
        LatencyConstraint(0)
    with pytest.raises(ValueError):
        ThermalConfig(80, 70, 5)
    with pytest.raises(ValueError):
        ThermalConfig(70, 80, 0)
    with pytest.raises(ValueError):
        RewardConfig(lam=-1)
    with pytest.raises(ValueError):
        RewardConfig(window_n=1)
    assert RewardConfig.from_dict({"lambda": 0.5, "penalty_p": 3, "window_n": 4}).lam == 0.5
    print("[OK] Config types validation")


def test_observation_proposal_rule():
    """Proposal count is present exactly at the post-RPN decision."""
    with pytest.raises(ValueError):
        Observation(Stage.FRAME_START, 40, 40, 0, 0, 10, proposals=5)
    with pytest.raises(ValueError):
        Observation(Stage.AFTER_RPN, 40, 40, 0, 0, 10)
    with pytest.raises(ValueError):
        Observation(Stage.AFTER_RPN, 40, 40, 0, 0, 10, proposals=-1)
    with pytest.raises(ValueError):
        Observation(Stage.FRAME_START, float("nan"), 40, 0, 0, 10)
    print("[OK] Observation invariants")


def test_transition_parity():
    s0 = Observation(Stage.FRAME_START, 40, 40, 0, 0, 10)
    s1 = Observation(Stage.AFTER_RPN, 41, 41, 0, 0, 5, proposals=3)
    Transition(s0, Action(0, 0), 1.0, s1, Parity.EVEN)
    Transition(s1, Action(0, 0), 1.0, s0, Parity.ODD)
    with pytest.raises(ValueError):
        Transition(s0, Action(0, 0), 1.0, s1, Parity.ODD)
    with pytest.raises(ValueError):
        Transition(s1, Action(0, 0), 1.0, s0, Parity.EVEN)
    print("[OK] Transition parity checked at construction")


def test_normalize_observation_examples():
    table = _table(4, 3)
    budget = LatencyConstraint(400)

    zero = normalize_observation(Observation(Stage.FRAME_START, 0, 0, 0, 0, 0), table, budget)
    assert zero.tolist() == [0, 0, 0, 0, 0, 0, 0]

    full = normalize_observation(
        Observation(Stage.AFTER_RPN, 50, 60, 3, 2, 400, proposals=1000), table, budget, 1000
    )
    assert np.allclose(full, [1, 0.5, 0.6, 1, 1, 1, 1])

    late = normalize_observation(Observation(Stage.FRAME_START, 0, 0, 0, 0, -200), table, budget)
    assert late[5] == -0.5
    print("[OK] Observation normalization")


def test_normalize_observation_monotone():
    table = _table(4, 3)
    budget = LatencyConstraint(400)
    base = dict(stage=Stage.AFTER_RPN, cpu_temp=40, gpu_temp=40, cpu_level=1,
                gpu_level=1, slack_ms=0, proposals=100)
    for field, lo, hi, idx in (("cpu_temp", 30, 60, 1), ("gpu_temp", 30, 60, 2),
                               ("cpu_level", 0, 3, 3), ("gpu_level", 0, 2, 4),
                               ("slack_ms", -100, 100, 5), ("proposals", 10, 900, 6)):
        a = normalize_observation(Observation(**{**base, field: lo}), table, budget)
        b = normalize_observation(Observation(**{**base, field: hi}), table, budget)
        assert a[idx] < b[idx], field
    print("[OK] Normalization is monotone per field")


if __name__ == "__main__":
    test_action_index_examples()
    test_action_index_bijection()
    test_action_index_out_of_bounds()
    test_table_validation()
    test_config_types_validation()
    test_observation_proposal_rule()
    test_transition_parity()
    test_normalize_observation_examples()
    test_normalize_observation_monotone()
