"""From-scratch convolutional network for waypoint regression."""
from .model import (
    CnnModel,
    backward,
    forward,
    init_model,
    load_model,
    mse_loss,
    predict_waypoint,
    save_model,
    smooth_waypoint,
)
from .train import AdamState, InsufficientDataError, TrainConfig, adam_step, learning_rate, train

__all__ = [
    "AdamState",
    "CnnModel",
    "InsufficientDataError",
    "TrainConfig",
    "adam_step",
    "backward",
    "forward",
    "init_model",
    "learning_rate",
    "load_model",
    "mse_loss",
    "predict_waypoint",
    "save_model",
    "smooth_waypoint",
    "train",
]
