"""Classifiers used as attack targets and surrogates."""

from odskit.models.mlp import (
    MlpClassifier, accuracy, forward_logits, init_mlp, predict
)
from odskit.models.serialization import load, save
from odskit.models.training import TrainHistory, TrainingDivergedError, train

__all__ = [
    "MlpClassifier", "TrainHistory", "TrainingDivergedError",
    "accuracy", "forward_logits", "init_mlp", "load", "predict", "save", "train",
]
