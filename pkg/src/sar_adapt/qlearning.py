"""Tabular Q-learning with per-epoch exponential epsilon decay.

Also holds the value-iteration oracle used to check learned policies, and the
CSV formats for Q-tables and per-epoch metrics.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .mdp import (
    N_ACTIONS,
    N_STATES,
    RewardParams,
    RobotAction,
    compute_reward,
    decode_state,
    encode_state,
)
from .rng import RngStream
from .usersim import UserModel, sample_initial_state, step_user, transition_distribution

QTABLE_HEADER = ["state", "gaze", "smile", "answer", "q_a0", "q_a1", "q_a2"]
METRICS_HEADER = ["epoch", "epsilon", "update_sum", "qtable_mean", "mean_episode_return"]


@dataclass
class QTable:
    values: np.ndarray = field(default_factory=lambda: np.zeros((N_STATES, N_ACTIONS)))
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (N_STATES, N_ACTIONS):
            raise ValueError(f"Q-table must be {N_STATES}x{N_ACTIONS}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Q-table contains non-finite values")


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.8
    discount: float = 0.05
    epsilon0: float = 0.2
    epsilon_decay_rate: float = 0.05
    epsilon_floor: float = 0.01
    step_penalty: float = -0.05
    epochs: int = 100
    episodes_per_epoch: int = 35
    steps_per_episode: int = 8

    def __post_init__(self):
        checks = [
            (0 < self.learning_rate <= 1, "learning_rate must be in (0, 1]"),
            (0 <= self.discount < 1, "discount must be in [0, 1)"),
            (0 <= self.epsilon0 <= 1, "epsilon0 must be in [0, 1]"),
            (self.epsilon_decay_rate >= 0, "epsilon_decay_rate must be >= 0"),
            (0 <= self.epsilon_floor <= self.epsilon0, "epsilon_floor must be in [0, epsilon0]"),
            (self.step_penalty < 0, "step_penalty must be negative"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.episodes_per_epoch >= 1, "episodes_per_epoch must be >= 1"),
            (self.steps_per_episode >= 1, "steps_per_episode must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    epsilon: float
    update_sum: float
    qtable_mean: float
    mean_episode_return: float


def q_update(q: QTable, s: int, a: int, r: float, s_next: int, alpha: float, gamma: float) -> float:
    """Watkins update in place; returns ``|new - old|``."""
    old = q.values[s, a]
    target = r + gamma * q.values[s_next].max()
    new = old + alpha * (target - old)
    q.values[s, a] = new
    return float(abs(new - old))


def epsilon_at(epoch: int, cfg: TrainingConfig) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return max(cfg.epsilon_floor, cfg.epsilon0 * math.exp(-cfg.epsilon_decay_rate * epoch))


def _argmax_lowest(row) -> int:
    best = 0
    for i in range(1, len(row)):
        if row[i] > row[best]:
            best = i
    return best


def select_action(q: QTable, s: int, epsilon: float, rng: RngStream) -> RobotAction:
    """Epsilon-greedy. Always one draw for the explore test, plus one if exploring."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.uniform() < epsilon:
        return RobotAction(rng.choice(N_ACTIONS))
    return RobotAction(_argmax_lowest(q.values[s]))


def greedy_policy(q: QTable) -> list[RobotAction]:
    return [RobotAction(_argmax_lowest(q.values[s])) for s in range(N_STATES)]


def train(model: UserModel, reward: RewardParams, cfg: TrainingConfig,
          seed: int) -> tuple[QTable, list[EpochMetrics]]:
    if reward.step_penalty != cfg.step_penalty:
        raise ValueError(
            f"step penalty mismatch: reward has {reward.step_penalty}, config has {cfg.step_penalty}"
        )
    rng = RngStream(seed)
    q = QTable(metadata={
        "seed": seed,
        "model": model.name,
        **{k: v for k, v in asdict(cfg).items()},
        **{f"reward_{k}": v for k, v in asdict(reward).items() if k != "step_penalty"},
        "epochs_trained": 0,
    })
    # reward depends only on the next state, so precompute it per index
    state_reward = [compute_reward(decode_state(i), reward) for i in range(N_STATES)]
    alpha, gamma = cfg.learning_rate, cfg.discount
    metrics: list[EpochMetrics] = []
    for epoch in range(cfg.epochs):
        eps = epsilon_at(epoch, cfg)
        update_sum = 0.0
        returns = 0.0
        for _ in range(cfg.episodes_per_epoch):
            obs = sample_initial_state(model, rng)
            s = encode_state(obs)
            for _ in range(cfg.steps_per_episode):
                a = select_action(q, s, eps, rng)
                obs = step_user(model, obs, a, rng)
                s_next = encode_state(obs)
                r = state_reward[s_next]
                # episode end is a time limit, not a terminal state: always bootstrap
                update_sum += q_update(q, s, a, r, s_next, alpha, gamma)
                returns += r
                s = s_next
        metrics.append(EpochMetrics(
            epoch=epoch,
            epsilon=eps,
            update_sum=update_sum,
            qtable_mean=float(q.values.mean()),
            mean_episode_return=returns / cfg.episodes_per_epoch,
        ))
    q.metadata["epochs_trained"] = cfg.epochs
    return q, metrics


def transition_matrix(model: UserModel) -> np.ndarray:
    """P[s, a, s'] for the full 30-state MDP."""
    P = np.zeros((N_STATES, N_ACTIONS, N_STATES))
    for s in range(N_STATES):
        obs = decode_state(s)
        for a in RobotAction:
            P[s, a] = transition_distribution(model, obs, a)
    return P


def value_iteration(model: UserModel, reward: RewardParams, gamma: float,
                    tolerance: float = 1e-10, max_sweeps: int = 10_000) -> QTable:
    """Exact Q* by synchronous Bellman optimality sweeps from Q = 0.

    The number of sweeps used is stored in ``metadata["sweeps"]``.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must be in [0, 1)")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    P = transition_matrix(model)
    R = np.array([compute_reward(decode_state(i), reward) for i in range(N_STATES)])
    q = np.zeros((N_STATES, N_ACTIONS))
    sweeps = 0
    while sweeps < max_sweeps:
        new = P @ (R + gamma * q.max(axis=1))
        sweeps += 1
        delta = np.abs(new - q).max()
        q = new
        if delta < tolerance:
            break
    return QTable(q, metadata={"model": model.name, "discount": gamma,
                               "tolerance": tolerance, "sweeps": sweeps})


def policy_agreement(a: list[RobotAction], b: list[RobotAction]) -> float:
    return sum(x == y for x, y in zip(a, b)) / len(a)


def _format_meta(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def dumps_qtable(q: QTable) -> str:
    buf = io.StringIO()
    for key, value in q.metadata.items():
        buf.write(f"# {key}={_format_meta(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(QTABLE_HEADER)
    for s in range(N_STATES):
        obs = decode_state(s)
        writer.writerow([s, obs.gaze.name, obs.smile.name, obs.answer.name,
                         *(repr(float(v)) for v in q.values[s])])
    return buf.getvalue()


def save_qtable(q: QTable, destination: str | Path) -> None:
    Path(destination).write_text(dumps_qtable(q))


def _parse_meta(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


class CSVFormatError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def loads_qtable(text: str) -> QTable:
    meta: dict = {}
    values = np.zeros((N_STATES, N_ACTIONS))
    header_seen = False
    row_count = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if not sep:
                raise CSVFormatError(lineno, f"malformed metadata comment {line!r}")
            meta[key.strip()] = _parse_meta(val.strip())
            continue
        fields = next(csv.reader([line]))
        if not header_seen:
            if fields != QTABLE_HEADER:
                raise CSVFormatError(lineno, f"expected header {','.join(QTABLE_HEADER)}")
            header_seen = True
            continue
        if len(fields) != len(QTABLE_HEADER):
            raise CSVFormatError(lineno, f"expected {len(QTABLE_HEADER)} columns, got {len(fields)}")
        if row_count >= N_STATES:
            raise CSVFormatError(lineno, f"more than {N_STATES} data rows")
        try:
            state = int(fields[0])
        except ValueError:
            raise CSVFormatError(lineno, f"bad state index {fields[0]!r}") from None
        if state != row_count:
            raise CSVFormatError(lineno, f"expected state {row_count}, got {state}")
        obs = decode_state(state)
        if fields[1:4] != [obs.gaze.name, obs.smile.name, obs.answer.name]:
            raise CSVFormatError(lineno, f"observation columns do not match state {state}")
        for j, cell in enumerate(fields[4:]):
            try:
                v = float(cell)
            except ValueError:
                raise CSVFormatError(lineno, f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise CSVFormatError(lineno, f"non-finite value {cell!r}")
            values[state, j] = v
        row_count += 1
    if not header_seen:
        raise CSVFormatError(0, "missing header")
    if row_count != N_STATES:
        raise CSVFormatError(0, f"expected {N_STATES} data rows, got {row_count}")
    return QTable(values, meta)


def load_qtable(source: str | Path) -> QTable:
    return loads_qtable(Path(source).read_text())


def dumps_metrics(metrics: list[EpochMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for m in metrics:
        writer.writerow([m.epoch, repr(m.epsilon), repr(m.update_sum),
                         repr(m.qtable_mean), repr(m.mean_episode_return)])
    return buf.getvalue()


def save_metrics(metrics: list[EpochMetrics], destination: str | Path) -> None:
    Path(destination).write_text(dumps_metrics(metrics))


def load_metrics(source: str | Path) -> list[EpochMetrics]:
    with Path(source).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER:
            raise ValueError(f"expected header {','.join(METRICS_HEADER)}")
        return [EpochMetrics(int(r["epoch"]), float(r["epsilon"]), float(r["update_sum"]),
                             float(r["qtable_mean"]), float(r["mean_episode_return"]))
                for r in reader]


def convergence_summary(metrics: list[EpochMetrics], window: int = 10) -> dict:
    """Tail/peak update-sum ratio and the largest tail qtable_mean step."""
    sums = [m.update_sum for m in metrics]
    means = [m.qtable_mean for m in metrics]
    if len(metrics) <= window:
        raise ValueError(f"need more than {window} epochs to assess convergence")
    peak = max(sums)
    tail = sum(sums[-window:]) / window
    drift = max(abs(means[i] - means[i - 1]) for i in range(len(means) - window, len(means)))
    return {"peak_update_sum": peak, "tail_update_sum": tail,
            "update_ratio": tail / peak if peak > 0 else 0.0,
            "max_tail_mean_drift": drift}
