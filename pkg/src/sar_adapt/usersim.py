"""Simulated healthy and MCI users.

A user model is a per-action engagement transition table plus an answer
model. The next observation is sampled in three draws: next engagement from
the table row, a (gaze, smile) pair uniformly inside that engagement class,
and answer correctness from ``p_correct`` of the new engagement.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .mdp import (
    ENGAGEMENT_CLASSES,
    N_STATES,
    AnswerOutcome,
    EngagementLevel,
    RobotAction,
    UserObservation,
    encode_state,
)
from .rng import RngStream

ROW_TOL = 1e-9
DATA_DIR = Path(__file__).parent / "data"
LEVEL_KEYS = ("low", "medium", "high")


class ConfigError(ValueError):
    """A fixture or config document failed schema or invariant checks."""


@dataclass(frozen=True, eq=False)
class UserModel:
    name: str
    transitions: np.ndarray  # [action, current engagement, next engagement]
    p_correct: np.ndarray  # [engagement]
    initial_engagement_dist: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.5, 0.5])
    )

    def __post_init__(self):
        if not self.name:
            raise ConfigError("name: must be non-empty")
        t = np.asarray(self.transitions, dtype=float)
        p = np.asarray(self.p_correct, dtype=float)
        init = np.asarray(self.initial_engagement_dist, dtype=float)
        if t.shape != (3, 3, 3):
            raise ConfigError(f"transitions: expected shape (3, 3, 3), got {t.shape}")
        if p.shape != (3,):
            raise ConfigError(f"p_correct: expected 3 values, got {p.shape}")
        if init.shape != (3,):
            raise ConfigError(f"initial_engagement: expected 3 values, got {init.shape}")
        for a in RobotAction:
            for e in EngagementLevel:
                row = t[a, e]
                where = f"transitions.{a.label}.{LEVEL_KEYS[e]}"
                if not np.all(np.isfinite(row)) or np.any(row < 0) or np.any(row > 1):
                    raise ConfigError(f"{where}: entries must be probabilities, got {row.tolist()}")
                if abs(row.sum() - 1.0) > ROW_TOL:
                    raise ConfigError(f"{where}: row sums to {row.sum():.10g}, expected 1")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise ConfigError(f"p_correct: entries must lie in [0, 1], got {p.tolist()}")
        if not (p[0] <= p[1] <= p[2]):
            raise ConfigError(
                f"p_correct: must be non-decreasing in engagement (low <= medium <= high), got {p.tolist()}"
            )
        if np.any(init < 0) or abs(init.sum() - 1.0) > ROW_TOL:
            raise ConfigError(f"initial_engagement: must be a distribution summing to 1, got {init.tolist()}")
        for attr, arr in (("transitions", t), ("p_correct", p), ("initial_engagement_dist", init)):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    def to_document(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "initial_engagement": self.initial_engagement_dist.tolist(),
            "p_correct": self.p_correct.tolist(),
            "transitions": {
                a.label: {LEVEL_KEYS[e]: self.transitions[a, e].tolist() for e in EngagementLevel}
                for a in RobotAction
            },
        }


def _require(doc: Mapping, key: str, where: str = ""):
    if not isinstance(doc, Mapping) or key not in doc:
        raise ConfigError(f"{where}{key}: missing required field")
    return doc[key]


def _float_list(value, where: str, n: int = 3) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers, got {value!r}")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected numbers, got {value!r}") from None


def load_user_model(source: Mapping) -> UserModel:
    """Build a validated model from a parsed config document."""
    if not isinstance(source, Mapping):
        raise ConfigError("user model document must be a mapping")
    version = _require(source, "schema_version")
    if version != 1:
        raise ConfigError(f"schema_version: unsupported value {version!r}")
    name = _require(source, "name")
    if not isinstance(name, str):
        raise ConfigError(f"name: expected text, got {name!r}")
    p_correct = _float_list(_require(source, "p_correct"), "p_correct")
    init = _float_list(source.get("initial_engagement", [0.0, 0.5, 0.5]), "initial_engagement")
    trans_doc = _require(source, "transitions")
    table = np.zeros((3, 3, 3))
    for a in RobotAction:
        rows = _require(trans_doc, a.label, "transitions.")
        for e in EngagementLevel:
            key = LEVEL_KEYS[e]
            where = f"transitions.{a.label}.{key}"
            table[a, e] = _float_list(_require(rows, key, f"transitions.{a.label}."), where)
    return UserModel(name=name, transitions=table, p_correct=np.array(p_correct),
                     initial_engagement_dist=np.array(init))


def load_user_model_file(path: str | Path) -> UserModel:
    path = Path(path)
    with path.open() as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    try:
        return load_user_model(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def default_model(name: str) -> UserModel:
    """Shipped fixture: ``"healthy"`` or ``"mci"``."""
    return load_user_model_file(DATA_DIR / f"{name}.model")


def transition_distribution(model: UserModel, current: UserObservation,
                            action: RobotAction) -> np.ndarray:
    row = model.transitions[int(action), current.engagement]
    out = np.zeros(N_STATES)
    for level, pairs in ENGAGEMENT_CLASSES.items():
        mass = row[level] / len(pairs)
        if mass == 0.0:
            continue
        pc = model.p_correct[level]
        for gaze, smile in pairs:
            out[encode_state(UserObservation(gaze, smile, AnswerOutcome.CORRECT))] = mass * pc
            out[encode_state(UserObservation(gaze, smile, AnswerOutcome.WRONG))] = mass * (1 - pc)
    return out


def _sample_in_class(level: EngagementLevel, rng: RngStream) -> tuple:
    pairs = ENGAGEMENT_CLASSES[level]
    return pairs[rng.choice(len(pairs))]


def step_user(model: UserModel, current: UserObservation, action: RobotAction,
              rng: RngStream) -> UserObservation:
    # draw order: engagement, pair within class, answer
    level = EngagementLevel(rng.categorical(model.transitions[int(action), current.engagement]))
    gaze, smile = _sample_in_class(level, rng)
    correct = rng.uniform() < model.p_correct[level]
    return UserObservation(gaze, smile, AnswerOutcome.CORRECT if correct else AnswerOutcome.WRONG)


def sample_initial_state(model: UserModel, rng: RngStream) -> UserObservation:
    """Two draws (engagement, pair); the answer starts at the Correct sentinel."""
    level = EngagementLevel(rng.categorical(model.initial_engagement_dist))
    gaze, smile = _sample_in_class(level, rng)
    return UserObservation(gaze, smile, AnswerOutcome.CORRECT)
