"""Linear softmax classifier over flattened features.

Serves three roles: the downstream utility model, the gradient source for
task-aware importance maps, and the attacker's model family.  A linear
model keeps the input gradient exact:

    grad_x CE(softmax(W x + b), y) = W^T (softmax(W x + b) - onehot(y))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from . import rngstream as rng


@dataclass
class SurrogateModel:
    weights: np.ndarray   # [num_classes x d]
    bias: np.ndarray      # [num_classes]

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise InvalidArgument("weights must be [K x d] with bias [K]")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise InvalidArgument("parameters must be finite")

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "SurrogateModel":
        return SurrogateModel(self.weights.copy(), self.bias.copy())

    @classmethod
    def zeros(cls, class_count: int, feature_dim: int) -> "SurrogateModel":
        return cls(np.zeros((class_count, feature_dim)), np.zeros(class_count))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(model: SurrogateModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return _softmax(x @ model.weights.T + model.bias)


def cross_entropy(model: SurrogateModel, x: np.ndarray, y: np.ndarray) -> float:
    p = predict_proba(model, x)
    n = p.shape[0]
    return float(-np.mean(np.log(p[np.arange(n), y] + 1e-300)))


def train(
    model: SurrogateModel,
    x: np.ndarray,
    y: np.ndarray,
    epochs: int,
    lr: float,
    seed: int,
    batch_size: int = 64,
) -> SurrogateModel:
    """Minibatch gradient descent on cross-entropy; returns a new model.

    Shuffling is seeded, so identical inputs give identical final weights.
    Zero epochs returns an unchanged copy.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise InvalidArgument("x must be [n x d] aligned with y")
    if x.shape[1] != model.feature_dim:
        raise InvalidArgument(
            f"feature dim {x.shape[1]} does not match model dim {model.feature_dim}"
        )
    if y.size and (y.min() < 0 or y.max() >= model.class_count):
        raise InvalidArgument("labels out of range")

    out = model.copy()
    n = x.shape[0]
    if n == 0 or epochs == 0:
        return out
    shuffler = np.random.Generator(
        np.random.Philox(key=rng.stream_key(rng.DOM_TRAIN_SHUFFLE, seed, 0))
    )
    for _ in range(epochs):
        order = shuffler.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = x[idx], y[idx]
            p = predict_proba(out, xb)
            p[np.arange(len(idx)), yb] -= 1.0
            p /= len(idx)
            out.weights -= lr * (p.T @ xb)
            out.bias -= lr * p.sum(axis=0)
    return out


def loss_and_input_gradient(
    model: SurrogateModel, x: np.ndarray, y: int
) -> tuple[float, np.ndarray]:
    """Cross-entropy loss and its exact gradient w.r.t. the input vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.feature_dim:
        raise InvalidArgument("input dim does not match model")
    if not 0 <= y < model.class_count:
        raise InvalidArgument("label out of range")
    p = predict_proba(model, x[None, :])[0]
    loss = float(-np.log(p[y] + 1e-300))
    p = p.copy()
    p[y] -= 1.0
    return loss, model.weights.T @ p


def evaluate(model: SurrogateModel, x: np.ndarray, y: np.ndarray) -> dict[str, float]:
    """Accuracy and macro-F1 (absent classes contribute an F1 of 0)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise InvalidArgument("need at least one evaluation sample")
    pred = predict_proba(model, x).argmax(axis=1)
    acc = float(np.mean(pred == y))
    f1s = []
    for c in range(model.class_count):
        tp = int(np.sum((pred == c) & (y == c)))
        fp = int(np.sum((pred == c) & (y != c)))
        fn = int(np.sum((pred != c) & (y == c)))
        denom = 2 * tp + fp + fn
        f1s.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return {"accuracy": acc, "macro_f1": float(np.mean(f1s))}
