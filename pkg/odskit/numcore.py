"""Dense tensor arithmetic and reverse-mode differentiation for small MLPs.

Tensors are plain float64 numpy arrays. A single input is a vector of
shape (D,), a batch is a matrix of shape (B, D). Models are anything
exposing ``weights`` and ``biases`` lists; hidden layers use ReLU and the
last layer is linear.
"""

from dataclasses import dataclass
from typing import Callable, List, Protocol, Sequence, Tuple, Union

import numpy as np

Tensor = np.ndarray


class DimensionError(ValueError):
    """Operand shapes do not chain."""
    pass


class Layered(Protocol):
    weights: List[np.ndarray]
    biases: List[np.ndarray]


def as_tensor(values, shape: "Sequence[int] | None" = None) -> Tensor:
    """Convert values into a finite float64 array, optionally reshaped."""
    arr = np.asarray(values, dtype=np.float64)
    if shape is not None:
        shape = tuple(shape)
        if any(d <= 0 for d in shape):
            raise DimensionError(f"Dimensions must be positive, got {shape}")
        if arr.size != int(np.prod(shape)):
            raise DimensionError(f"Cannot view {arr.size} values as {shape}")
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("Tensor values must be finite")
    return arr


def affine(inputs: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Compute ``inputs @ weight + bias`` for a batch of rows."""
    inputs = np.atleast_2d(inputs)
    if weight.ndim != 2 or inputs.shape[1] != weight.shape[0]:
        raise DimensionError(
            f"Cannot multiply input {inputs.shape} with weight {weight.shape}"
        )
    if bias.shape != (weight.shape[1],):
        raise DimensionError(
            f"Bias {bias.shape} does not match weight columns {weight.shape[1]}"
        )
    return inputs @ weight + bias


def relu(inputs: Tensor) -> Tensor:
    return np.maximum(inputs, 0.0)


def log_softmax(logits: Tensor) -> Tensor:
    """Log-softmax along the last axis with max subtraction."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _check_label(label: int, num_classes: int) -> None:
    if not 0 <= int(label) < num_classes:
        raise IndexError(f"Label {label} out of range for {num_classes} classes")


def softmax_cross_entropy(logits: Tensor, label: int) -> float:
    """Return -log softmax(logits)[label]."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_label(label, logits.shape[-1])
    return float(-log_softmax(logits)[..., int(label)])


def runner_up(logits: Tensor, label: int) -> int:
    """Index of the largest logit other than ``label`` (lowest index on ties)."""
    masked = np.array(logits, dtype=np.float64)
    masked[int(label)] = -np.inf
    return int(np.argmax(masked))


def margin_loss(logits: Tensor, label: int) -> float:
    """Return max_{i != label} logits[i] - logits[label]."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[-1] < 2:
        raise ValueError("Margin loss needs at least two classes")
    _check_label(label, logits.shape[-1])
    return float(logits[runner_up(logits, label)] - logits[int(label)])


# Scalar heads. ``values`` maps a (B, C) logit matrix to B scalars and
# ``grads`` returns the matching (B, C) derivatives. Labels may be a single
# index or one index per row.

def _row_labels(labels, batch: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(labels, dtype=np.int64), (batch,))


@dataclass(frozen=True)
class CrossEntropyHead:
    label: Union[int, np.ndarray]

    def values(self, logits: Tensor) -> np.ndarray:
        labels = _row_labels(self.label, logits.shape[0])
        for lab in np.unique(labels):
            _check_label(lab, logits.shape[1])
        return -log_softmax(logits)[np.arange(logits.shape[0]), labels]

    def grads(self, logits: Tensor) -> np.ndarray:
        labels = _row_labels(self.label, logits.shape[0])
        probs = np.exp(log_softmax(logits))
        probs[np.arange(logits.shape[0]), labels] -= 1.0
        return probs


@dataclass(frozen=True)
class TargetedCrossEntropyHead:
    """Negated cross-entropy toward ``target``; larger is closer to the target."""
    target: int

    def values(self, logits: Tensor) -> np.ndarray:
        return -CrossEntropyHead(self.target).values(logits)

    def grads(self, logits: Tensor) -> np.ndarray:
        return -CrossEntropyHead(self.target).grads(logits)


@dataclass(frozen=True)
class MarginHead:
    label: Union[int, np.ndarray]

    def _picks(self, logits: Tensor) -> Tuple[np.ndarray, np.ndarray]:
        if logits.shape[1] < 2:
            raise ValueError("Margin loss needs at least two classes")
        labels = _row_labels(self.label, logits.shape[0])
        for lab in np.unique(labels):
            _check_label(lab, logits.shape[1])
        others = np.array([runner_up(row, lab) for row, lab in zip(logits, labels)])
        return labels, others

    def values(self, logits: Tensor) -> np.ndarray:
        labels, others = self._picks(logits)
        rows = np.arange(logits.shape[0])
        return logits[rows, others] - logits[rows, labels]

    def grads(self, logits: Tensor) -> np.ndarray:
        labels, others = self._picks(logits)
        rows = np.arange(logits.shape[0])
        out = np.zeros_like(logits)
        out[rows, others] += 1.0
        out[rows, labels] -= 1.0
        return out


@dataclass(frozen=True)
class LinearHead:
    """w^T f(x) for a fixed output-space direction w."""
    weights: np.ndarray

    def values(self, logits: Tensor) -> np.ndarray:
        if logits.shape[1] != self.weights.shape[0]:
            raise DimensionError(
                f"Direction of length {self.weights.shape[0]} "
                f"does not match {logits.shape[1]} logits"
            )
        return logits @ self.weights

    def grads(self, logits: Tensor) -> np.ndarray:
        return np.broadcast_to(self.weights, logits.shape).copy()


Head = Union[CrossEntropyHead, TargetedCrossEntropyHead, MarginHead, LinearHead]


@dataclass
class Gradient:
    """Derivatives of a scalar head w.r.t. the input and the parameters."""
    wrt_input: Tensor
    wrt_params: np.ndarray


def forward(model: Layered, x: Tensor) -> Tensor:
    """Logits for a batch (or single row) of inputs."""
    logits, _ = _forward_trace(model, np.atleast_2d(x))
    return logits


def _forward_trace(model: Layered, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
    activations = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = affine(h, w, b)
        if i < last:
            h = relu(h)
            activations.append(h)
    return h, activations


def _backward(model: Layered, activations: List[Tensor],
              grad_logits: Tensor) -> Tuple[Tensor, List[Tensor]]:
    """Propagate dL/dlogits back to the input and every parameter."""
    grad = grad_logits
    param_grads: List[Tensor] = []
    for i in range(len(model.weights) - 1, -1, -1):
        inputs = activations[i]
        param_grads.append(grad.sum(axis=0))           # bias
        param_grads.append(inputs.T @ grad)            # weight
        grad = grad @ model.weights[i].T
        if i > 0:
            grad = grad * (activations[i] > 0.0)
    param_grads.reverse()
    return grad, param_grads


def _flatten(arrays: List[Tensor]) -> np.ndarray:
    if not arrays:
        return np.zeros(0)
    return np.concatenate([a.ravel() for a in arrays])


def value_and_input_grad(model: Layered, x: Tensor, head: Head) -> Tuple[float, Gradient]:
    """Scalar head value and its exact gradient w.r.t. ``x``.

    For a batch the value is the sum over rows, so each row of the input
    gradient is the gradient of that row's own head value.
    """
    x = np.asarray(x, dtype=np.float64)
    batch = np.atleast_2d(x)
    if batch.shape[1] != model.weights[0].shape[0]:
        raise DimensionError(
            f"Input has {batch.shape[1]} features, model expects {model.weights[0].shape[0]}"
        )
    logits, activations = _forward_trace(model, batch)
    value = float(np.sum(head.values(logits)))
    grad_x, param_grads = _backward(model, activations, head.grads(logits))
    return value, Gradient(wrt_input=grad_x.reshape(x.shape), wrt_params=_flatten(param_grads))


def value_and_grads(model: Layered, x_batch: Tensor, head: Head) -> Tuple[float, Gradient]:
    """Batch-mean head value with parameter gradients, for training."""
    batch = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    n = batch.shape[0]
    logits, activations = _forward_trace(model, batch)
    value = float(np.mean(head.values(logits)))
    grad_x, param_grads = _backward(model, activations, head.grads(logits) / n)
    return value, Gradient(wrt_input=grad_x, wrt_params=_flatten(param_grads))


def finite_diff_grad(fn: Callable[[Tensor], float], x: Tensor, step: float = 1e-4) -> Tensor:
    """Central-difference gradient of a scalar function, coordinate by coordinate."""
    if step <= 0:
        raise ValueError("Finite-difference step must be positive")
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel().copy()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn(flat.reshape(x.shape))
        flat[i] = orig - step
        down = fn(flat.reshape(x.shape))
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * step)
    return grad.reshape(x.shape)
