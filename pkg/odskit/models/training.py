"""Mini-batch training with optional adversarial (inner PGD) batches."""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from odskit import numcore
from odskit.config_schema import TrainConfig, schedule_value
from odskit.datasets import Dataset
from odskit.models.mlp import (
    MlpClassifier, accuracy, flat_parameters, weight_mask, with_flat_parameters
)

logger = logging.getLogger("odskit")


class TrainingDivergedError(RuntimeError):
    """Loss became NaN or infinite."""
    pass


@dataclass
class TrainHistory:
    losses: List[float] = field(default_factory=list)
    train_accuracy: float = 0.0


class _Sgd:
    """SGD with momentum 0.9."""

    def __init__(self, size: int, momentum: float = 0.9):
        self.momentum = momentum
        self.velocity = np.zeros(size)

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float) -> np.ndarray:
        self.velocity = self.momentum * self.velocity + grads
        return params - lr * self.velocity


class _Adam:
    def __init__(self, size: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1 - self.beta2) * grads * grads
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(model: MlpClassifier, dataset: Dataset,
          config: TrainConfig) -> Tuple[MlpClassifier, TrainHistory]:
    """Train a copy of ``model``; the input model is left untouched."""
    if len(dataset) == 0:
        raise ValueError("Cannot train on an empty dataset")
    if dataset.labels.max() >= model.num_classes or dataset.labels.min() < 0:
        raise ValueError(
            f"Labels must lie in [0, {model.num_classes}), got max {dataset.labels.max()}"
        )
    if dataset.dim != model.input_dim:
        raise numcore.DimensionError(
            f"Dataset has {dataset.dim} features, model expects {model.input_dim}"
        )

    # Inner PGD lives with the attacks; imported here to keep models importable on its own.
    from odskit.attacks.whitebox import pgd_batch

    rng = np.random.default_rng(config.seed)
    params = flat_parameters(model)
    decay = config.weight_decay * weight_mask(model)
    optimizer = _Adam(params.size) if config.optimizer == "adam" else _Sgd(params.size)
    history = TrainHistory()
    current = model.copy()
    n = len(dataset)

    for epoch in range(config.epochs):
        lr = schedule_value(config.schedule, epoch)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            x_b, y_b = dataset.features[idx], dataset.labels[idx]
            if config.adversarial is not None:
                adv = config.adversarial
                x_b = pgd_batch(current, x_b, y_b, adv.epsilon, adv.step_size, adv.steps, rng)
            loss, grad = numcore.value_and_grads(current, x_b, numcore.CrossEntropyHead(y_b))
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"Loss became {loss} at epoch {epoch}")
            params = optimizer.step(params, grad.wrt_params + decay * params, lr)
            current = with_flat_parameters(current, params)
            epoch_loss += loss * len(idx)
        history.losses.append(epoch_loss / n)
        logger.debug(f"Epoch {epoch + 1}/{config.epochs}: loss {history.losses[-1]:.4f} (lr {lr:g})")

    history.train_accuracy = accuracy(current, dataset.features, dataset.labels)
    logger.info(
        f"Trained {current.layer_sizes} for {config.epochs} epochs: "
        f"train accuracy {history.train_accuracy:.3f}"
    )
    return current, history
