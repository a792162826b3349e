"""Toy embedding encoder, Adam, and the training/scoring loops."""

from .adam import AdamState, OptimizerError, adam_step
from .encoder import Encoder, EncoderConfig, EncoderError
from .loop import Checkpoint, TrainingError, TrainRunConfig, evaluate, init_checkpoint, train

__all__ = [
    "AdamState",
    "Checkpoint",
    "Encoder",
    "EncoderConfig",
    "EncoderError",
    "OptimizerError",
    "TrainRunConfig",
    "TrainingError",
    "adam_step",
    "evaluate",
    "init_checkpoint",
    "train",
]
