"""MLP numerics: forward pass, cross-entropy, gradients, momentum SGD.

Plain numpy on float64. The model is a single ReLU hidden layer with a
linear softmax head; the head parameters (``w2``, ``b2``) are the "last
layer" that the gradient-based weighting machinery works on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# Probabilities are clamped here before taking logs so that a confidently
# wrong prediction yields a large finite loss instead of inf.
PROB_FLOOR = 1e-12


@dataclass
class MlpModel:
    """One-hidden-layer MLP. Arrays are float64 and owned by the model."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    @property
    def n_head_params(self) -> int:
        """Size of the flattened last-layer gradient vector."""
        return self.w2.size + self.b2.size

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy()
        )

    def param_names(self) -> tuple[str, ...]:
        return ("w1", "b1", "w2", "b2")


@dataclass
class MlpGrads:
    """Full-model gradient, same shapes as the model parameters."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def scaled(self, factor: float) -> "MlpGrads":
        return MlpGrads(
            self.w1 * factor, self.b1 * factor, self.w2 * factor, self.b2 * factor
        )

    def add(self, other: "MlpGrads") -> "MlpGrads":
        return MlpGrads(
            self.w1 + other.w1,
            self.b1 + other.b1,
            self.w2 + other.w2,
            self.b2 + other.b2,
        )


def init_mlp(n_inputs: int, n_hidden: int, n_classes: int, rng) -> MlpModel:
    """He-initialised weights, zero biases."""
    w1 = rng.standard_normal((n_inputs, n_hidden)) * np.sqrt(2.0 / n_inputs)
    w2 = rng.standard_normal((n_hidden, n_classes)) * np.sqrt(2.0 / n_hidden)
    return MlpModel(w1, np.zeros(n_hidden), w2, np.zeros(n_classes))


def _check_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_inputs:
        raise ValueError(
            f"expected input of shape (n, {model.n_inputs}), got {x.shape}"
        )
    return x


def hidden_activations(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = _check_batch(model, x)
    return np.maximum(x @ model.w1 + model.b1, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities, shape (n, n_classes); rows sum to 1."""
    h = hidden_activations(model, x)
    return softmax(h @ model.w2 + model.b2)


def per_sample_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != probs.shape[0]:
        raise ValueError("labels must be a vector matching the batch size")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise ValueError("label outside the model's class range")
    p = probs[np.arange(len(labels)), labels]
    n_clamped = int(np.count_nonzero(p < PROB_FLOOR))
    if n_clamped:
        logger.warning(
            "clamped %d zero probabilities at the true label before log", n_clamped
        )
        p = np.maximum(p, PROB_FLOOR)
    return -np.log(p)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of a batch."""
    return float(per_sample_cross_entropy(probs, labels).mean())


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def last_layer_grad(model: MlpModel, x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of mean cross-entropy w.r.t. (w2, b2), flattened.

    Layout: w2 entries in C order, then b2. Length ``model.n_head_params``.
    """
    h = hidden_activations(model, x)
    probs = softmax(h @ model.w2 + model.b2)
    delta = (probs - _one_hot(np.asarray(labels), model.n_classes)) / len(labels)
    gw2 = h.T @ delta
    gb2 = delta.sum(axis=0)
    return np.concatenate([gw2.ravel(), gb2])


def per_sample_last_layer_grads(
    model: MlpModel, x: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Row i is ``last_layer_grad`` of sample i alone; shape (n, n_head_params)."""
    h = hidden_activations(model, x)
    probs = softmax(h @ model.w2 + model.b2)
    delta = probs - _one_hot(np.asarray(labels), model.n_classes)
    gw2 = h[:, :, None] * delta[:, None, :]
    return np.concatenate([gw2.reshape(len(labels), -1), delta], axis=1)


def full_grads(
    model: MlpModel,
    x: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray | None = None,
) -> MlpGrads:
    """Full-model gradient of (1/n) * sum_i w_i * ce(sample i).

    The normaliser is the batch size n, never the weight total, so zero
    weights remove a sample's pull without rescaling the rest.
    """
    x = _check_batch(model, x)
    labels = np.asarray(labels)
    n = len(labels)
    pre = x @ model.w1 + model.b1
    h = np.maximum(pre, 0.0)
    probs = softmax(h @ model.w2 + model.b2)
    delta2 = (probs - _one_hot(labels, model.n_classes)) / n
    if sample_weights is not None:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != (n,):
            raise ValueError("sample_weights must match the batch size")
        delta2 = delta2 * w[:, None]
    gw2 = h.T @ delta2
    gb2 = delta2.sum(axis=0)
    dh = delta2 @ model.w2.T
    dh[pre <= 0.0] = 0.0
    gw1 = x.T @ dh
    gb1 = dh.sum(axis=0)
    return MlpGrads(gw1, gb1, gw2, gb2)


def unit_normalize(vec: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; an (effectively) zero vector is returned as-is."""
    norm = float(np.linalg.norm(vec))
    if norm < 1e-15:
        return vec.copy()
    return vec / norm


def momentum_step(
    param: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One SGD-with-momentum update: v' = mu*v + g, p' = p - lr*v'."""
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    v = momentum * velocity + grad
    return param - lr * v, v


class SgdMomentum:
    """Momentum state for a model; velocities start (and reset) at zero."""

    def __init__(self, model: MlpModel, momentum: float = 0.9):
        self.momentum = momentum
        self._velocity = {
            name: np.zeros_like(getattr(model, name)) for name in model.param_names()
        }

    def reset(self) -> None:
        for v in self._velocity.values():
            v[:] = 0.0

    def step(self, model: MlpModel, grads: MlpGrads, lr: float) -> None:
        for name in model.param_names():
            new_p, new_v = momentum_step(
                getattr(model, name),
                getattr(grads, name),
                self._velocity[name],
                lr,
                self.momentum,
            )
            setattr(model, name, new_p)
            self._velocity[name] = new_v
