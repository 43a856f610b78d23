"""Cooking-game session engine.

A session walks Introduction -> RecipeInstruction -> (Question -> Answer) x 8
-> EndingFeedback. Each Question/Answer round is one MDP step: the robot acts
on the current observation (feedback on the most recent answer), poses the
question, and the user's reaction after answering is the next observation.
"""
from __future__ import annotations

import json
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Union

import numpy as np
import yaml

from .behavior import BehaviorSpec, BehaviorTable, PersonalityProfile
from .mdp import (
    N_STATES,
    AnswerOutcome,
    EngagementLevel,
    GazeDirection,
    RewardParams,
    RobotAction,
    SmileState,
    UserObservation,
    compute_reward,
    encode_state,
)
from .qlearning import QTable, select_action
from .rng import RngStream
from .usersim import DATA_DIR, ConfigError, UserModel, sample_initial_state, step_user

N_QUESTIONS = 8


class GameStage(Enum):
    INTRODUCTION = "introduction"
    RECIPE_INSTRUCTION = "recipe_instruction"
    QUESTION = "question"
    ANSWER = "answer"
    ENDING_FEEDBACK = "ending_feedback"


class StageError(RuntimeError):
    pass


def advance_stage(current: GameStage, rounds_completed: int) -> GameStage:
    if not 0 <= rounds_completed <= N_QUESTIONS:
        raise ValueError(f"rounds_completed must be in 0..{N_QUESTIONS}")
    if current is GameStage.INTRODUCTION:
        return GameStage.RECIPE_INSTRUCTION
    if current is GameStage.RECIPE_INSTRUCTION:
        return GameStage.QUESTION
    if current is GameStage.QUESTION:
        return GameStage.ANSWER
    if current is GameStage.ANSWER:
        return GameStage.QUESTION if rounds_completed < N_QUESTIONS else GameStage.ENDING_FEEDBACK
    raise StageError("EndingFeedback is terminal")


@dataclass(frozen=True)
class Ingredient:
    name: str
    weight: float
    order: int


@dataclass(frozen=True)
class Question:
    prompt: str
    options: tuple[str, ...]
    correct_index: int


@dataclass(frozen=True)
class Recipe:
    name: str
    ingredients: tuple[Ingredient, ...]
    questions: tuple[Question, ...]

    def __post_init__(self):
        if len(self.questions) != N_QUESTIONS:
            raise ConfigError(f"questions: expected exactly {N_QUESTIONS}, got {len(self.questions)}")
        ranks = sorted(i.order for i in self.ingredients)
        if ranks != list(range(1, len(self.ingredients) + 1)):
            raise ConfigError(f"ingredients: order ranks must be a permutation of 1..{len(ranks)}")
        for n, q in enumerate(self.questions):
            if len(q.options) < 2:
                raise ConfigError(f"questions[{n}].options: need at least 2 options")
            if not 0 <= q.correct_index < len(q.options):
                raise ConfigError(f"questions[{n}].correct_index: {q.correct_index} out of range")

    @classmethod
    def from_document(cls, doc: Mapping) -> "Recipe":
        if not isinstance(doc, Mapping) or doc.get("schema_version") != 1:
            raise ConfigError("schema_version: expected 1")
        try:
            ingredients = tuple(Ingredient(str(i["name"]), float(i["weight"]), int(i["order"]))
                                for i in doc["ingredients"])
            questions = tuple(Question(str(q["prompt"]), tuple(str(o) for o in q["options"]),
                                       int(q["correct_index"]))
                              for q in doc["questions"])
            return cls(str(doc["name"]), ingredients, questions)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"recipe: missing or malformed field {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "Recipe":
        with Path(path).open() as fh:
            return cls.from_document(yaml.safe_load(fh))

    @classmethod
    def default(cls) -> "Recipe":
        return cls.from_file(DATA_DIR / "recipe.yaml")


@dataclass(frozen=True)
class RoundRecord:
    question_index: int
    observation_before: UserObservation
    action_taken: RobotAction
    behavior: BehaviorSpec
    answer_given: int
    reward: float
    observation_after: UserObservation

    @property
    def behavior_spec_id(self) -> str:
        return self.behavior.spec_id

    def to_dict(self) -> dict:
        return {
            "type": "round",
            "question_index": self.question_index,
            "observation_before": _obs_dict(self.observation_before),
            "action_taken": self.action_taken.label,
            "behavior_spec_id": self.behavior_spec_id,
            "answer_given": self.answer_given,
            "reward": self.reward,
            "observation_after": _obs_dict(self.observation_after),
        }


def _obs_dict(obs: UserObservation) -> dict:
    return {"gaze": obs.gaze.name, "smile": obs.smile.name, "answer": obs.answer.name,
            "engagement": obs.engagement.name}


@dataclass
class SessionLog:
    personality: str
    source: str
    rounds: list[RoundRecord] = field(default_factory=list)
    complete: bool = False

    @property
    def correct_count(self) -> int:
        return sum(r.observation_after.answer is AnswerOutcome.CORRECT for r in self.rounds)

    @property
    def cumulative_reward(self) -> float:
        return sum(r.reward for r in self.rounds)

    @property
    def engagement_histogram(self) -> dict[EngagementLevel, int]:
        hist = {level: 0 for level in EngagementLevel}
        for r in self.rounds:
            hist[r.observation_after.engagement] += 1
        return hist

    def summary(self) -> dict:
        return {
            "type": "summary",
            "personality": self.personality,
            "source": self.source,
            "complete": self.complete,
            "rounds": len(self.rounds),
            "correct_count": self.correct_count,
            "cumulative_reward": self.cumulative_reward,
            "engagement_histogram": {k.name: v for k, v in self.engagement_histogram.items()},
        }

    def to_records(self) -> list[dict]:
        return [r.to_dict() for r in self.rounds] + [self.summary()]

    def write_jsonl(self, fh) -> None:
        for rec in self.to_records():
            fh.write(json.dumps(rec) + "\n")


Policy = Callable[[int, RngStream], RobotAction]


def table_policy(actions: Sequence[RobotAction]) -> Policy:
    if len(actions) != N_STATES:
        raise ValueError(f"policy table must have {N_STATES} entries")
    fixed = [RobotAction(a) for a in actions]
    return lambda s, rng: fixed[s]


def constant_policy(action: RobotAction) -> Policy:
    action = RobotAction(action)
    return lambda s, rng: action


def epsilon_greedy_policy(q: QTable, epsilon: float) -> Policy:
    return lambda s, rng: select_action(q, s, epsilon, rng)


def as_policy(policy) -> Policy:
    if callable(policy):
        return policy
    return table_policy(policy)


class OperatorAbort(Exception):
    """The live operator ended input before the session finished."""


class LiveOperator(Protocol):
    """Terminal stand-in for perception: supplies observations and answers."""

    def start(self, recipe: Recipe) -> UserObservation: ...

    def present(self, question_index: int, question: Question, observation: UserObservation,
                behavior: BehaviorSpec) -> None: ...

    def respond(self, question_index: int, question: Question) -> tuple[GazeDirection, SmileState, int]: ...

    def report(self, record: RoundRecord) -> None: ...


UserSource = Union[UserModel, LiveOperator]


@dataclass(frozen=True)
class GameSession:
    """One session's fixed setup. The personality cannot change once built."""

    recipe: Recipe
    personality: PersonalityProfile
    reward: RewardParams
    behaviors: BehaviorTable

    def run(self, policy, user: UserSource, rng: RngStream) -> SessionLog:
        policy = as_policy(policy)
        live = not isinstance(user, UserModel)
        log = SessionLog(self.personality.name, "live" if live else user.name)
        stage = advance_stage(GameStage.INTRODUCTION, 0)
        try:
            obs = user.start(self.recipe) if live else sample_initial_state(user, rng)
            stage = advance_stage(stage, 0)
            for k, question in enumerate(self.recipe.questions):
                assert stage is GameStage.QUESTION
                action = policy(encode_state(obs), rng)
                behavior = self.behaviors.render(action, self.personality, obs.answer)
                if live:
                    user.present(k, question, obs, behavior)
                stage = advance_stage(stage, k)
                if live:
                    gaze, smile, option = user.respond(k, question)
                    outcome = (AnswerOutcome.CORRECT if option == question.correct_index
                               else AnswerOutcome.WRONG)
                    nxt = UserObservation(gaze, smile, outcome)
                else:
                    nxt = step_user(user, obs, action, rng)
                    option = _simulated_option(question, nxt.answer)
                record = RoundRecord(k, obs, action, behavior, option,
                                     compute_reward(nxt, self.reward), nxt)
                log.rounds.append(record)
                if live:
                    user.report(record)
                obs = nxt
                stage = advance_stage(stage, k + 1)
        except OperatorAbort:
            return log
        assert stage is GameStage.ENDING_FEEDBACK
        log.complete = True
        return log


def _simulated_option(question: Question, answer: AnswerOutcome) -> int:
    if answer is AnswerOutcome.CORRECT:
        return question.correct_index
    return next(i for i in range(len(question.options)) if i != question.correct_index)


def run_episode(policy, user: UserSource, recipe: Recipe, personality: PersonalityProfile,
                reward: RewardParams, rng: RngStream,
                behaviors: BehaviorTable | None = None) -> SessionLog:
    session = GameSession(recipe, personality, reward, behaviors or BehaviorTable.default())
    return session.run(policy, user, rng)


@dataclass(frozen=True)
class EvaluationSummary:
    episodes: int
    mean_return: float
    ci95_halfwidth: float | None  # None when a single episode was run
    engagement_time_fractions: dict[EngagementLevel, float]
    correct_rate: float

    @property
    def medium_or_high_fraction(self) -> float:
        f = self.engagement_time_fractions
        return f[EngagementLevel.MEDIUM] + f[EngagementLevel.HIGH]

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean_return": self.mean_return,
            "ci95_halfwidth": self.ci95_halfwidth,
            "engagement_time_fractions": {k.name: v for k, v in self.engagement_time_fractions.items()},
            "medium_or_high_fraction": self.medium_or_high_fraction,
            "correct_rate": self.correct_rate,
        }


def simulate_episodes(policy, model: UserModel, reward: RewardParams, episodes: int, seed: int,
                      recipe: Recipe | None = None, personality: PersonalityProfile | None = None,
                      behaviors: BehaviorTable | None = None) -> list[SessionLog]:
    """Episode ``i`` uses the stream derived from ``(seed, i)``, so runs pair across policies."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    behaviors = behaviors or BehaviorTable.default()
    personality = personality or next(iter(behaviors.personalities.values()))
    session = GameSession(recipe or Recipe.default(), personality, reward, behaviors)
    root = RngStream(seed)
    return [session.run(policy, model, root.derive(i)) for i in range(episodes)]


def summarize(logs: Sequence[SessionLog]) -> EvaluationSummary:
    returns = np.array([log.cumulative_reward for log in logs])
    n = len(returns)
    hist = {level: 0 for level in EngagementLevel}
    rounds = correct = 0
    for log in logs:
        for level, c in log.engagement_histogram.items():
            hist[level] += c
        rounds += len(log.rounds)
        correct += log.correct_count
    half = None if n < 2 else 1.96 * float(returns.std(ddof=1)) / math.sqrt(n)
    return EvaluationSummary(
        episodes=n,
        mean_return=float(returns.mean()),
        ci95_halfwidth=half,
        engagement_time_fractions={k: v / rounds for k, v in hist.items()},
        correct_rate=correct / rounds,
    )


def evaluate_policy(policy, model: UserModel, reward: RewardParams, episodes: int,
                    seed: int) -> EvaluationSummary:
    return summarize(simulate_episodes(policy, model, reward, episodes, seed))


def is_valid_transcript(stages: Sequence[GameStage]) -> bool:
    """True iff ``stages`` is a complete legal walk of the stage machine."""
    if not stages or stages[0] is not GameStage.INTRODUCTION:
        return False
    rounds = 0
    for prev, nxt in zip(stages, stages[1:]):
        if prev is GameStage.ANSWER:
            rounds += 1
        try:
            expected = advance_stage(prev, rounds)
        except (StageError, ValueError):
            return False
        if nxt is not expected:
            return False
    return stages[-1] is GameStage.ENDING_FEEDBACK
