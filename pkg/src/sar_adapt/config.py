"""Experiment configuration: one YAML document tying every fixture together.

Fixture paths in the file resolve against the file's directory and then the
shipped ``data/`` directory; ``out`` resolves against the working directory.
"""
from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import yaml

from .behavior import BehaviorTable, PersonalityProfile
from .mdp import RewardParams
from .qlearning import TrainingConfig
from .session import Recipe
from .usersim import DATA_DIR, ConfigError, UserModel, load_user_model_file

DEFAULT_EXPERIMENT = DATA_DIR / "experiment.yaml"


@dataclass(frozen=True)
class ExperimentConfig:
    training: TrainingConfig
    reward: RewardParams
    model: UserModel
    model_path: Path
    recipe: Recipe
    behaviors: BehaviorTable
    personality: PersonalityProfile
    seed: int
    out: Path


def resolve_fixture(name: str | Path, base: Path | None = None) -> Path:
    """Existing path as given, else relative to ``base``, else a shipped fixture."""
    p = Path(name)
    candidates = [p] if p.is_absolute() else [p, *( [base / p] if base else []), DATA_DIR / p]
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"file not found: {name}")


def _section(doc: Mapping, key: str, cls):
    raw = doc.get(key) or {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{key}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{key}: unknown field(s) {', '.join(sorted(unknown))}")
    return raw


def load_experiment(path: str | Path | None = None, *, seed: int | None = None,
                    model: str | None = None, out: str | None = None,
                    personality: str | None = None) -> ExperimentConfig:
    """Load and validate everything up front; keyword arguments override the file."""
    path = Path(path) if path is not None else DEFAULT_EXPERIMENT
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{path}: expected a mapping at top level")
    if doc.get("schema_version") != 1:
        raise ConfigError(f"{path}: schema_version: expected 1")
    base = path.parent

    reward_raw = _section(doc, "reward", RewardParams)
    training_raw = _section(doc, "training", TrainingConfig)
    if "step_penalty" in training_raw:
        raise ConfigError("training.step_penalty: set the step penalty under reward only")
    try:
        reward = RewardParams(**{k: float(v) for k, v in reward_raw.items()})
        training = TrainingConfig(**training_raw, step_penalty=reward.step_penalty)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    # explicit CLI paths resolve against the working directory, file paths against the file
    model_path = (resolve_fixture(model) if model is not None
                  else resolve_fixture(doc.get("model", "mci.model"), base))
    user_model = load_user_model_file(model_path)
    recipe = Recipe.from_file(resolve_fixture(doc.get("recipe", "recipe.yaml"), base))
    behaviors = BehaviorTable.from_file(resolve_fixture(doc.get("behaviors", "behaviors.yaml"), base))
    try:
        profile = behaviors.load_personality(personality or doc.get("personality", "Extraverted"))
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None

    seed = seed if seed is not None else doc.get("seed", 42)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed: expected a 64-bit unsigned integer, got {seed!r}")
    # output directories are relative to the working directory, not the config file
    out_dir = Path(out if out is not None else doc.get("out", "runs/default"))
    return ExperimentConfig(training, reward, user_model, model_path, recipe, behaviors,
                            profile, seed, out_dir)
