"""Fully connected ReLU classifiers."""

from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from odskit import numcore
from odskit.numcore import DimensionError


@dataclass
class MlpClassifier:
    """Dense network [D, h1, ..., C]; ReLU on hidden layers, linear output."""
    layer_sizes: List[int]
    weights: List[np.ndarray] = field(default_factory=list)
    biases: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise DimensionError(f"Invalid layer sizes: {self.layer_sizes}")
        if self.layer_sizes[-1] < 2:
            raise DimensionError("A classifier needs at least two outputs")
        if not self.weights:
            self.weights = [np.zeros((a, b)) for a, b in zip(self.layer_sizes, self.layer_sizes[1:])]
            self.biases = [np.zeros(b) for b in self.layer_sizes[1:]]
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (a, b) in enumerate(zip(self.layer_sizes, self.layer_sizes[1:])):
            if self.weights[i].shape != (a, b) or self.biases[i].shape != (b,):
                raise DimensionError(
                    f"Layer {i} has weight {self.weights[i].shape} / bias {self.biases[i].shape}, "
                    f"expected ({a}, {b}) / ({b},)"
                )

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpClassifier":
        return MlpClassifier(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_mlp(layer_sizes: Sequence[int], seed: int = 0) -> MlpClassifier:
    """He-scaled Gaussian weights and zero biases."""
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in layer_sizes]
    weights = [rng.normal(scale=np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(sizes, sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpClassifier(layer_sizes=sizes, weights=weights, biases=biases)


def forward_logits(model: MlpClassifier, x: np.ndarray) -> np.ndarray:
    """Logits with the same leading shape as ``x`` ((D,) -> (C,), (B, D) -> (B, C))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionError(f"Input has {x.shape[-1]} features, model expects {model.input_dim}")
    logits = numcore.forward(model, x)
    return logits[0] if x.ndim == 1 else logits


def predict(model: MlpClassifier, x: np.ndarray) -> Union[int, np.ndarray]:
    """Argmax class; ties go to the lowest index."""
    logits = forward_logits(model, x)
    if logits.ndim == 1:
        return int(np.argmax(logits))
    return np.argmax(logits, axis=1)


def accuracy(model: MlpClassifier, x: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(predict(model, np.atleast_2d(x)) == np.asarray(y)))


def flat_parameters(model: MlpClassifier) -> np.ndarray:
    """Parameters in registry order W1, b1, W2, b2, ..."""
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.extend([w.ravel(), b.ravel()])
    return np.concatenate(parts)


def with_flat_parameters(model: MlpClassifier, values: np.ndarray) -> MlpClassifier:
    weights, biases = [], []
    offset = 0
    for w, b in zip(model.weights, model.biases):
        weights.append(values[offset:offset + w.size].reshape(w.shape).copy())
        offset += w.size
        biases.append(values[offset:offset + b.size].copy())
        offset += b.size
    if offset != values.size:
        raise DimensionError(f"Expected {offset} parameters, got {values.size}")
    return MlpClassifier(layer_sizes=list(model.layer_sizes), weights=weights, biases=biases)


def weight_mask(model: MlpClassifier) -> np.ndarray:
    """1 for weight entries, 0 for biases, in registry order."""
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.extend([np.ones(w.size), np.zeros(b.size)])
    return np.concatenate(parts)
