"""Q-learning adaptation toolkit for a socially assistive robot in a cooking quiz."""

from .mdp import (
    AnswerOutcome,
    EngagementLevel,
    GazeDirection,
    RewardParams,
    RobotAction,
    SmileState,
    UserObservation,
    classify_engagement,
    compute_reward,
    decode_state,
    encode_state,
)
from .qlearning import QTable, TrainingConfig, greedy_policy, train, value_iteration
from .usersim import UserModel, default_model, load_user_model

__all__ = [
    "AnswerOutcome", "EngagementLevel", "GazeDirection", "RewardParams", "RobotAction",
    "SmileState", "UserObservation", "classify_engagement", "compute_reward", "decode_state",
    "encode_state", "QTable", "TrainingConfig", "greedy_policy", "train", "value_iteration",
    "UserModel", "default_model", "load_user_model",
]
