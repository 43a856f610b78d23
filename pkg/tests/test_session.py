import io
import json
import re
from dataclasses import FrozenInstanceError

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from sar_adapt.behavior import BehaviorTable, load_personality
from sar_adapt.mdp import (
    AnswerOutcome,
    EngagementLevel,
    GazeDirection,
    RobotAction,
    SmileState,
    UserObservation,
)
from sar_adapt.qlearning import greedy_policy, value_iteration
from sar_adapt.rng import RngStream
from sar_adapt.session import (
    GameSession,
    GameStage,
    OperatorAbort,
    Recipe,
    StageError,
    advance_stage,
    constant_policy,
    epsilon_greedy_policy,
    evaluate_policy,
    is_valid_transcript,
    run_episode,
    simulate_episodes,
)
from sar_adapt.usersim import DATA_DIR, ConfigError, UserModel

GS = GameStage
LETTER = {GS.INTRODUCTION: "I", GS.RECIPE_INSTRUCTION: "R", GS.QUESTION: "Q",
          GS.ANSWER: "A", GS.ENDING_FEEDBACK: "E"}
LANGUAGE = re.compile(r"IR(QA){8}E")


@pytest.fixture(scope="module")
def recipe():
    return Recipe.default()


@pytest.fixture(scope="module")
def ext():
    return load_personality("Extraverted")


@pytest.fixture(scope="module")
def always_high():
    t = np.zeros((3, 3, 3))
    t[:, :, 2] = 1.0
    return UserModel("always-high", t, np.ones(3), np.array([0.0, 0.0, 1.0]))


def test_advance_stage_examples():
    assert advance_stage(GS.INTRODUCTION, 0) is GS.RECIPE_INSTRUCTION
    assert advance_stage(GS.RECIPE_INSTRUCTION, 0) is GS.QUESTION
    assert advance_stage(GS.QUESTION, 3) is GS.ANSWER
    assert advance_stage(GS.ANSWER, 7) is GS.QUESTION
    assert advance_stage(GS.ANSWER, 8) is GS.ENDING_FEEDBACK
    with pytest.raises(StageError):
        advance_stage(GS.ENDING_FEEDBACK, 8)
    with pytest.raises(ValueError):
        advance_stage(GS.ANSWER, 9)


def test_canonical_transcript_accepted():
    walk = [GS.INTRODUCTION, GS.RECIPE_INSTRUCTION] + [GS.QUESTION, GS.ANSWER] * 8 + [GS.ENDING_FEEDBACK]
    assert is_valid_transcript(walk)
    assert not is_valid_transcript(walk[:-3] + walk[-1:])
    assert not is_valid_transcript(walk + [GS.ENDING_FEEDBACK])


@given(st.lists(st.sampled_from(list(GS)), max_size=24))
def test_stage_machine_language(walk):
    word = "".join(LETTER[s] for s in walk)
    assert is_valid_transcript(walk) == bool(LANGUAGE.fullmatch(word))


@given(st.integers(0, 30))
def test_near_canonical_walks(cut):
    # mutate one position of the canonical walk; only the original is legal
    walk = [GS.INTRODUCTION, GS.RECIPE_INSTRUCTION] + [GS.QUESTION, GS.ANSWER] * 8 + [GS.ENDING_FEEDBACK]
    i = cut % len(walk)
    for other in GS:
        mutated = walk[:i] + [other] + walk[i + 1:]
        assert is_valid_transcript(mutated) == (other is walk[i])


def test_recipe_fixture(recipe):
    assert len(recipe.questions) == 8
    assert sorted(i.order for i in recipe.ingredients) == list(range(1, 7))


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["questions"].pop(), "exactly 8"),
    (lambda d: d["questions"][2].update(correct_index=5), "correct_index"),
    (lambda d: d["questions"][0].update(options=["only"]), "at least 2"),
    (lambda d: d["ingredients"][0].update(order=9), "permutation"),
    (lambda d: d.pop("name"), "name"),
])
def test_recipe_validation(mutate, msg):
    doc = yaml.safe_load((DATA_DIR / "recipe.yaml").read_text())
    mutate(doc)
    with pytest.raises(ConfigError, match=msg):
        Recipe.from_document(doc)


def test_degenerate_user_answers_everything(always_high, recipe, ext, reward):
    for action in RobotAction:
        log = run_episode(constant_policy(action), always_high, recipe, ext, reward, RngStream(5))
        assert log.complete and len(log.rounds) == 8
        assert log.correct_count == 8
        assert log.engagement_histogram[EngagementLevel.HIGH] == 8


def test_log_bookkeeping(mci, recipe, ext, reward, healthy):
    policy = epsilon_greedy_policy(value_iteration(healthy, reward, 0.05), 0.3)
    for seed in range(20):
        log = run_episode(policy, mci, recipe, ext, reward, RngStream(seed))
        assert log.cumulative_reward == sum(r.reward for r in log.rounds)
        assert sum(log.engagement_histogram.values()) == 8
        assert [r.question_index for r in log.rounds] == list(range(8))
        for prev, cur in zip(log.rounds, log.rounds[1:]):
            assert cur.observation_before == prev.observation_after
        assert all(r.behavior.personality == "Extraverted" for r in log.rounds)


def test_episode_reproducible(mci, recipe, ext, reward):
    policy = epsilon_greedy_policy(value_iteration(mci, reward, 0.05), 0.5)
    a = run_episode(policy, mci, recipe, ext, reward, RngStream(77))
    b = run_episode(policy, mci, recipe, ext, reward, RngStream(77))
    assert a.to_records() == b.to_records()


def test_jsonl_export(mci, recipe, ext, reward):
    log = run_episode(constant_policy(RobotAction.NEUTRAL), mci, recipe, ext, reward, RngStream(1))
    buf = io.StringIO()
    log.write_jsonl(buf)
    records = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert [r["type"] for r in records] == ["round"] * 8 + ["summary"]
    assert records[-1]["cumulative_reward"] == log.cumulative_reward


def test_session_personality_is_fixed(recipe, ext, reward):
    session = GameSession(recipe, ext, reward, BehaviorTable.default())
    with pytest.raises(FrozenInstanceError):
        session.personality = load_personality("Introverted")


class ScriptedOperator:
    def __init__(self, answers, abort_after=None):
        self.answers = answers
        self.abort_after = abort_after
        self.presented = []

    def start(self, recipe):
        return UserObservation(GazeDirection.ROBOT, SmileState.SMILING, AnswerOutcome.CORRECT)

    def present(self, k, question, obs, behavior):
        self.presented.append(behavior)

    def respond(self, k, question):
        if self.abort_after is not None and k >= self.abort_after:
            raise OperatorAbort()
        return GazeDirection.LEFT, SmileState.NOT_SMILING, self.answers[k]

    def report(self, record):
        pass


def test_live_operator_round_trip(recipe, ext, reward):
    answers = [q.correct_index for q in recipe.questions]
    answers[3] = (answers[3] + 1) % len(recipe.questions[3].options)
    op = ScriptedOperator(answers)
    log = run_episode(constant_policy(RobotAction.STIMULATING), op, recipe, ext, reward, RngStream(0))
    assert log.complete and log.source == "live"
    assert log.correct_count == 7
    assert len(op.presented) == 8
    assert all(r.observation_after.engagement is EngagementLevel.LOW for r in log.rounds)


def test_live_operator_abort_gives_partial_log(recipe, ext, reward):
    op = ScriptedOperator([q.correct_index for q in recipe.questions], abort_after=3)
    log = run_episode(constant_policy(RobotAction.NEUTRAL), op, recipe, ext, reward, RngStream(0))
    assert not log.complete and len(log.rounds) == 3


def test_evaluate_single_episode(mci, reward, recipe, ext):
    policy = constant_policy(RobotAction.NEUTRAL)
    summary = evaluate_policy(policy, mci, reward, 1, 9)
    log = simulate_episodes(policy, mci, reward, 1, 9)[0]
    assert summary.mean_return == log.cumulative_reward
    assert summary.ci95_halfwidth is None
    with pytest.raises(ValueError):
        evaluate_policy(policy, mci, reward, 0, 9)


def test_engagement_fractions_partition(mci, reward):
    s = evaluate_policy(constant_policy(RobotAction.ENTHUSIASTIC), mci, reward, 50, 3)
    assert abs(sum(s.engagement_time_fractions.values()) - 1.0) <= 1e-9
    assert s.ci95_halfwidth > 0


def test_oracle_policy_beats_neutral_baseline(mci, reward):
    oracle = greedy_policy(value_iteration(mci, reward, 0.05))
    best = evaluate_policy(oracle, mci, reward, 1000, 2023)
    base = evaluate_policy(constant_policy(RobotAction.NEUTRAL), mci, reward, 1000, 2023)
    assert best.mean_return >= base.mean_return
    assert best.medium_or_high_fraction > base.medium_or_high_fraction
