import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sar_adapt.mdp import N_STATES, RewardParams, RobotAction, decode_state
from sar_adapt.qlearning import (
    CSVFormatError,
    QTable,
    TrainingConfig,
    convergence_summary,
    dumps_metrics,
    dumps_qtable,
    epsilon_at,
    greedy_policy,
    load_metrics,
    load_qtable,
    loads_qtable,
    q_update,
    save_metrics,
    save_qtable,
    select_action,
    train,
    value_iteration,
)
from sar_adapt.rng import RngStream
from sar_adapt.usersim import UserModel

from .oracles import LEVELS, class_value_iteration, expected_reward, raw_model

A0, A1, A2 = RobotAction

# pinned from tests/oracles.py (class-level value iteration, gamma=0.05)
ORACLE_CLASS_POLICY = {
    "healthy": {"low": A2, "medium": A0, "high": A0},
    "mci": {"low": A2, "medium": A2, "high": A0},
}


def test_training_defaults():
    cfg = TrainingConfig()
    assert (cfg.learning_rate, cfg.discount, cfg.epsilon0) == (0.8, 0.05, 0.2)
    assert (cfg.epochs, cfg.episodes_per_epoch, cfg.steps_per_episode) == (100, 35, 8)
    assert cfg.step_penalty == -0.05


@pytest.mark.parametrize("kwargs", [
    dict(learning_rate=0.0), dict(discount=1.0), dict(epsilon0=1.5),
    dict(epsilon_floor=0.3), dict(epsilon_decay_rate=-1), dict(epochs=-1),
])
def test_training_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainingConfig(**kwargs)


def test_q_update_zero_bootstrap():
    q = QTable()
    assert q_update(q, 0, 0, 1.0, 1, 0.8, 0.05) == pytest.approx(0.8)
    assert q.values[0, 0] == pytest.approx(0.8)


def test_q_update_with_bootstrap():
    q = QTable()
    q.values[3, 1] = 0.5
    q.values[4] = [0.1, 0.2, -0.3]
    delta = q_update(q, 3, 1, 1.0, 4, 0.8, 0.05)
    assert q.values[3, 1] == pytest.approx(0.908)
    assert delta == pytest.approx(0.408)


def test_q_update_fixed_point():
    q = QTable()
    q.values[2, 2] = 0.7
    assert q_update(q, 2, 2, 0.7, 5, 0.8, 0.05) == 0.0


def test_epsilon_schedule():
    cfg = TrainingConfig()
    assert epsilon_at(0, cfg) == 0.2
    assert epsilon_at(100, cfg) == 0.01
    assert epsilon_at(10**6, cfg) == 0.01
    assert epsilon_at(10, cfg) == pytest.approx(0.2 * math.exp(-0.5))
    with pytest.raises(ValueError):
        epsilon_at(-1, cfg)


@given(st.integers(0, 500), st.floats(0, 1), st.floats(0, 2), st.floats(0, 1))
def test_epsilon_monotone_and_floored(epoch, eps0, k, floor_frac):
    cfg = TrainingConfig(epsilon0=eps0, epsilon_decay_rate=k, epsilon_floor=eps0 * floor_frac)
    assert epsilon_at(epoch + 1, cfg) <= epsilon_at(epoch, cfg)
    assert epsilon_at(epoch, cfg) >= cfg.epsilon_floor


def test_select_action_greedy_and_ties():
    q = QTable()
    q.values[0] = [0.1, 0.9, 0.3]
    q.values[1] = [0.5, 0.5, 0.1]
    rng = RngStream(0)
    assert select_action(q, 0, 0.0, rng) is A1
    assert select_action(q, 1, 0.0, rng) is A0


def test_select_action_uniform_when_exploring():
    q = QTable()
    q.values[0] = [5.0, 0.0, 0.0]
    rng = RngStream(7)
    n = 100_000
    counts = Counter(select_action(q, 0, 1.0, rng) for _ in range(n))
    for a in RobotAction:
        assert abs(counts[a] / n - 1 / 3) <= 0.01
    assert rng.draws == 2 * n


def test_greedy_policy_zero_table():
    assert greedy_policy(QTable()) == [A0] * N_STATES


@given(st.lists(st.floats(-5, 5), min_size=90, max_size=90), st.floats(-100, 100))
def test_greedy_policy_shift_invariant(vals, c):
    base = QTable(np.array(vals).reshape(N_STATES, 3))
    # exact shift can merge near-ties in floating point; compare on a quantized grid
    base.values = np.round(base.values, 3)
    shifted = QTable(base.values + np.round(c, 3))
    assert greedy_policy(base) == greedy_policy(shifted)


def test_train_zero_epochs(healthy, reward):
    q, metrics = train(healthy, reward, TrainingConfig(epochs=0), 42)
    assert np.all(q.values == 0) and metrics == []


def test_train_step_penalty_mismatch(healthy):
    with pytest.raises(ValueError, match="step penalty"):
        train(healthy, RewardParams(step_penalty=-0.1), TrainingConfig(), 1)


def test_train_deterministic(healthy, reward):
    q1, m1 = train(healthy, reward, TrainingConfig(), 42)
    q2, m2 = train(healthy, reward, TrainingConfig(), 42)
    assert dumps_qtable(q1) == dumps_qtable(q2)
    assert dumps_metrics(m1) == dumps_metrics(m2)
    q3, _ = train(healthy, reward, TrainingConfig(), 43)
    assert not np.array_equal(q1.values, q3.values)


@pytest.mark.parametrize("model_name", ["healthy", "mci"])
def test_trained_values_bounded_and_metrics_shape(request, reward, model_name):
    model = request.getfixturevalue(model_name)
    q, metrics = train(model, reward, TrainingConfig(), 42)
    assert np.all(np.isfinite(q.values))
    assert np.abs(q.values).max() <= 1.45 / 0.95
    assert [m.epoch for m in metrics] == list(range(100))
    assert all(m.update_sum >= 0 for m in metrics)
    assert q.metadata["epochs_trained"] == 100 and q.metadata["model"] == model_name


def test_value_iteration_myopic(healthy, reward):
    q = value_iteration(healthy, reward, 0.0)
    doc = raw_model("healthy")
    for s in range(N_STATES):
        level = LEVELS[decode_state(s).engagement]
        for a in RobotAction:
            expected = sum(doc["transitions"][a.label][level][j] * expected_reward(doc, e2)
                           for j, e2 in enumerate(LEVELS))
            assert q.values[s, a] == pytest.approx(expected, abs=1e-12)
    assert q.metadata["sweeps"] == 2


@pytest.mark.parametrize("name", ["healthy", "mci"])
def test_value_iteration_matches_class_oracle(request, reward, name):
    model = request.getfixturevalue(name)
    q = value_iteration(model, reward, 0.05, tolerance=1e-10)
    assert q.metadata["sweeps"] <= 20
    ref, _ = class_value_iteration(raw_model(name), 0.05)
    for s in range(N_STATES):
        level = LEVELS[decode_state(s).engagement]
        for a in RobotAction:
            assert q.values[s, a] == pytest.approx(ref[level][a.label], abs=1e-9)


@pytest.mark.parametrize("name", ["healthy", "mci"])
def test_oracle_policy_fixture(request, reward, name):
    model = request.getfixturevalue(name)
    policy = greedy_policy(value_iteration(model, reward, 0.05))
    expected = [ORACLE_CLASS_POLICY[name][LEVELS[decode_state(s).engagement]] for s in range(N_STATES)]
    assert policy == expected


def test_qtable_rejects_bad_shape_and_nan():
    with pytest.raises(ValueError):
        QTable(np.zeros((29, 3)))
    bad = np.zeros((30, 3))
    bad[4, 1] = np.nan
    with pytest.raises(ValueError):
        QTable(bad)


def test_qtable_csv_round_trip(tmp_path, mci, reward):
    q, metrics = train(mci, reward, TrainingConfig(epochs=5), 11)
    save_qtable(q, tmp_path / "q.csv")
    back = load_qtable(tmp_path / "q.csv")
    assert np.array_equal(back.values, q.values)
    assert back.metadata == q.metadata
    save_metrics(metrics, tmp_path / "m.csv")
    assert load_metrics(tmp_path / "m.csv") == metrics


def test_qtable_csv_layout(mci, reward):
    text = dumps_qtable(QTable(metadata={"seed": 42, "alpha": 0.8}))
    lines = text.splitlines()
    assert lines[:2] == ["# seed=42", "# alpha=0.8"]
    assert lines[2] == "state,gaze,smile,answer,q_a0,q_a1,q_a2"
    assert lines[3] == "0,ROBOT,NOT_SMILING,WRONG,0.0,0.0,0.0"
    assert len(lines) == 33


def test_qtable_csv_missing_row():
    text = "\n".join(dumps_qtable(QTable()).splitlines()[:-1])
    with pytest.raises(CSVFormatError, match="expected 30 data rows, got 29"):
        loads_qtable(text)


def test_qtable_csv_nan_rejected_with_line():
    lines = dumps_qtable(QTable()).splitlines()
    lines[5] = lines[5].rsplit(",", 1)[0] + ",NaN"
    with pytest.raises(CSVFormatError, match="line 6: non-finite"):
        loads_qtable("\n".join(lines))


def test_qtable_csv_wrong_columns():
    lines = dumps_qtable(QTable()).splitlines()
    lines[2] += ",0.0"
    with pytest.raises(CSVFormatError, match="line 3: expected 7 columns"):
        loads_qtable("\n".join(lines))


@pytest.fixture(scope="module")
def deterministic_world():
    """Each action drives engagement to one fixed level; reward ignores the answer."""
    t = np.zeros((3, 3, 3))
    t[A0, :, 1] = t[A1, :, 0] = t[A2, :, 2] = 1.0
    model = UserModel("deterministic", t, np.full(3, 0.5), np.full(3, 1 / 3))
    return model, RewardParams(correct_bonus=0.0)


def test_control_deterministic_rewards_converge_at_paper_settings(deterministic_world):
    model, reward = deterministic_world
    for seed in (42, 1, 2):
        _, metrics = train(model, reward, TrainingConfig(), seed)
        c = convergence_summary(metrics)
        assert c["update_ratio"] <= 0.10 and c["max_tail_mean_drift"] < 1e-2


def test_control_full_exploration_recovers_q_star(deterministic_world):
    model, reward = deterministic_world
    q_star = value_iteration(model, reward, 0.05)
    q, _ = train(model, reward, TrainingConfig(epsilon0=1.0, epsilon_floor=0.3), 42)
    assert np.abs(q.values - q_star.values).max() < 1e-9
    assert greedy_policy(q) == greedy_policy(q_star)
