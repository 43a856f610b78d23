"""MDP vocabulary for the serious-game adaptation problem.

States are raw user observations (gaze, smile, last answer); engagement is
derived from gaze and smile and never stored on the state axis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import IntEnum


class GazeDirection(IntEnum):
    ROBOT = 0
    TABLET = 1
    UP = 2
    LEFT = 3
    RIGHT = 4


class SmileState(IntEnum):
    NOT_SMILING = 0
    SMILING = 1
    BROADLY_SMILING = 2


class AnswerOutcome(IntEnum):
    WRONG = 0
    CORRECT = 1


class EngagementLevel(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


class RobotAction(IntEnum):
    ENTHUSIASTIC = 0
    NEUTRAL = 1
    STIMULATING = 2

    @property
    def label(self) -> str:
        return f"a{int(self)}"

    @classmethod
    def parse(cls, text: str) -> "RobotAction":
        key = text.strip().lower()
        for action in cls:
            if key in (action.label, action.name.lower()):
                return action
        raise ValueError(f"unknown action {text!r}")


N_STATES = len(GazeDirection) * len(SmileState) * len(AnswerOutcome)
N_ACTIONS = len(RobotAction)

ATTENTIVE_GAZE = frozenset({GazeDirection.ROBOT, GazeDirection.TABLET})


@dataclass(frozen=True)
class UserObservation:
    gaze: GazeDirection
    smile: SmileState
    answer: AnswerOutcome

    @property
    def engagement(self) -> EngagementLevel:
        return classify_engagement(self.gaze, self.smile)

    def __str__(self) -> str:
        return f"({self.gaze.name}, {self.smile.name}, {self.answer.name})"


@dataclass(frozen=True)
class RewardParams:
    r_high: float = 1.0
    r_medium: float = 0.2
    r_low: float = -1.0
    correct_bonus: float = 0.5
    wrong_bonus: float = 0.0
    step_penalty: float = -0.05

    def __post_init__(self):
        if not self.r_high > self.r_medium > self.r_low:
            raise ValueError(
                "engagement rewards must satisfy r_high > r_medium > r_low, got "
                f"{self.r_high}, {self.r_medium}, {self.r_low}"
            )
        if not self.step_penalty < 0:
            raise ValueError(f"step_penalty must be negative, got {self.step_penalty}")

    def engagement_component(self, level: EngagementLevel) -> float:
        return (self.r_low, self.r_medium, self.r_high)[level]

    def answer_component(self, answer: AnswerOutcome) -> float:
        return self.correct_bonus if answer == AnswerOutcome.CORRECT else self.wrong_bonus


def classify_engagement(gaze: GazeDirection, smile: SmileState) -> EngagementLevel:
    """Additive score: attentive gaze counts 2, smile counts its code.

    Scores 0-1 are Low, 2 is Medium, 3-4 are High.
    """
    score = (2 if gaze in ATTENTIVE_GAZE else 0) + int(smile)
    if score <= 1:
        return EngagementLevel.LOW
    if score == 2:
        return EngagementLevel.MEDIUM
    return EngagementLevel.HIGH


def encode_state(obs: UserObservation) -> int:
    return int(obs.gaze) * 6 + int(obs.smile) * 2 + int(obs.answer)


def decode_state(index: int) -> UserObservation:
    if not 0 <= index < N_STATES:
        raise IndexError(f"state index {index} outside 0..{N_STATES - 1}")
    gaze, rest = divmod(index, 6)
    smile, answer = divmod(rest, 2)
    return UserObservation(GazeDirection(gaze), SmileState(smile), AnswerOutcome(answer))


def all_observations() -> list[UserObservation]:
    return [decode_state(i) for i in range(N_STATES)]


def engagement_classes() -> dict[EngagementLevel, list[tuple[GazeDirection, SmileState]]]:
    """(gaze, smile) pairs grouped by engagement, in gaze-major code order."""
    classes: dict[EngagementLevel, list[tuple[GazeDirection, SmileState]]] = {
        level: [] for level in EngagementLevel
    }
    for gaze, smile in itertools.product(GazeDirection, SmileState):
        classes[classify_engagement(gaze, smile)].append((gaze, smile))
    return classes


ENGAGEMENT_CLASSES = engagement_classes()


def compute_reward(next_obs: UserObservation, params: RewardParams) -> float:
    return (
        params.engagement_component(next_obs.engagement)
        + params.answer_component(next_obs.answer)
        + params.step_penalty
    )
