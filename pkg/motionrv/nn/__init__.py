"""1D-CNN regressor written directly on numpy."""

from motionrv.nn.checkpoint import load_checkpoint, save_checkpoint
from motionrv.nn.model import (Architecture, CnnModel, backward, forward,
                               mse_loss)
from motionrv.nn.optim import AdamState, adam_step
from motionrv.nn.train import (EpochRecord, TrainConfig, TrainResult,
                               predict_series, train)

__all__ = [
    "Architecture",
    "CnnModel",
    "forward",
    "backward",
    "mse_loss",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "TrainResult",
    "EpochRecord",
    "train",
    "predict_series",
    "save_checkpoint",
    "load_checkpoint",
]
