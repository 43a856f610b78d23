"""Render robot actions as declarative, personality-conditioned behavior records.

A rendered spec multiplies the personality's vocal base by a per-action
modifier. Nothing here talks to a robot; a client consumes ``BehaviorSpec``.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict, dataclass
from pathlib import Path

import yaml

from .mdp import AnswerOutcome, RobotAction
from .rng import RngStream
from .usersim import DATA_DIR, ConfigError

PROFILE_FIELDS = ("volume_mult", "speech_rate_mult", "pitch_mult",
                  "gesture_amplitude", "gesture_frequency", "proactivity")


@dataclass(frozen=True)
class PersonalityProfile:
    name: str
    volume_mult: float
    speech_rate_mult: float
    pitch_mult: float
    gesture_amplitude: float
    gesture_frequency: float
    proactivity: float

    def __post_init__(self):
        for f in ("volume_mult", "speech_rate_mult", "pitch_mult"):
            if not getattr(self, f) > 0:
                raise ConfigError(f"{self.name}.{f}: must be > 0")
        for f in ("gesture_amplitude", "gesture_frequency", "proactivity"):
            if not 0 <= getattr(self, f) <= 1:
                raise ConfigError(f"{self.name}.{f}: must be in [0, 1]")


@dataclass(frozen=True)
class ActionModifier:
    volume: float
    speech_rate: float
    pitch: float
    amplitude: float
    animation_tag: str


# a0 amplifies, a1 keeps the personality base, a2 is quieter but moves closer.
ACTION_MODIFIERS = {
    RobotAction.ENTHUSIASTIC: ActionModifier(1.2, 1.15, 1.1, 1.2, "big-celebration"),
    RobotAction.NEUTRAL: ActionModifier(1.0, 1.0, 1.0, 1.0, "nod"),
    RobotAction.STIMULATING: ActionModifier(0.9, 0.9, 1.0, 0.8, "lean-in"),
}


@dataclass(frozen=True)
class BehaviorSpec:
    utterance: str
    volume_mult: float
    speech_rate_mult: float
    pitch_mult: float
    animation_tag: str
    gesture_amplitude: float
    action: RobotAction
    personality: str
    spec_id: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["action"] = self.action.label
        return d


class BehaviorTable:
    """Personality profiles plus the (personality, action, outcome) utterance grid."""

    def __init__(self, personalities: dict[str, PersonalityProfile],
                 utterances: dict[tuple[str, RobotAction, AnswerOutcome], list[str]]):
        self.personalities = personalities
        self.utterances = utterances

    @classmethod
    def from_document(cls, doc: Mapping) -> "BehaviorTable":
        if not isinstance(doc, Mapping) or doc.get("schema_version") != 1:
            raise ConfigError("schema_version: expected 1")
        profiles = {}
        for name, fields in (doc.get("personalities") or {}).items():
            missing = [f for f in PROFILE_FIELDS if f not in fields]
            if missing:
                raise ConfigError(f"personalities.{name}: missing {', '.join(missing)}")
            profiles[name] = PersonalityProfile(name, **{f: float(fields[f]) for f in PROFILE_FIELDS})
        if not profiles:
            raise ConfigError("personalities: at least one profile required")
        lines = {}
        utt = doc.get("utterances") or {}
        for name in profiles:
            for action in RobotAction:
                for outcome in AnswerOutcome:
                    key = outcome.name.lower()
                    try:
                        entry = utt[name][action.label][key]
                    except (KeyError, TypeError):
                        raise ConfigError(
                            f"utterances.{name}.{action.label}.{key}: missing"
                        ) from None
                    if not entry or not all(isinstance(s, str) and s.strip() for s in entry):
                        raise ConfigError(
                            f"utterances.{name}.{action.label}.{key}: needs non-empty lines"
                        )
                    lines[(name, action, outcome)] = list(entry)
        return cls(profiles, lines)

    @classmethod
    def from_file(cls, path: str | Path) -> "BehaviorTable":
        with Path(path).open() as fh:
            return cls.from_document(yaml.safe_load(fh))

    @classmethod
    def default(cls) -> "BehaviorTable":
        return cls.from_file(DATA_DIR / "behaviors.yaml")

    def load_personality(self, name: str) -> PersonalityProfile:
        """Case-insensitive lookup; unknown names raise ``KeyError``."""
        for key, profile in self.personalities.items():
            if key.lower() == name.strip().lower():
                return profile
        raise KeyError(f"unknown personality {name!r}; known: {', '.join(self.personalities)}")

    def render(self, action: RobotAction, personality: PersonalityProfile,
               outcome: AnswerOutcome, rng: RngStream | None = None) -> BehaviorSpec:
        options = self.utterances[(personality.name, action, outcome)]
        idx = rng.choice(len(options)) if rng is not None else 0
        mod = ACTION_MODIFIERS[action]
        return BehaviorSpec(
            utterance=options[idx],
            volume_mult=personality.volume_mult * mod.volume,
            speech_rate_mult=personality.speech_rate_mult * mod.speech_rate,
            pitch_mult=personality.pitch_mult * mod.pitch,
            animation_tag=mod.animation_tag,
            gesture_amplitude=min(1.0, personality.gesture_amplitude * mod.amplitude),
            action=action,
            personality=personality.name,
            spec_id=f"{personality.name}/{action.label}/{outcome.name.lower()}/{idx}",
        )


_DEFAULT: BehaviorTable | None = None


def _default_table() -> BehaviorTable:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = BehaviorTable.default()
    return _DEFAULT


def load_personality(name: str, table: BehaviorTable | None = None) -> PersonalityProfile:
    return (table or _default_table()).load_personality(name)


def render_behavior(action: RobotAction, personality: PersonalityProfile,
                    outcome: AnswerOutcome, table: BehaviorTable | None = None,
                    rng: RngStream | None = None) -> BehaviorSpec:
    return (table or _default_table()).render(action, personality, outcome, rng)
