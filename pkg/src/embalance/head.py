"""Linear classification head: softmax cross-entropy and one-vs-rest hinge trainers.

Both losses are optimized with plain mini-batch SGD at a constant learning
rate, with L2 decay on the weights (biases are not decayed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from embalance.errors import ConfigError, DataError, NumericalError
from embalance.store import LabeledEmbeddingSet

LOSS_KINDS = ("softmax_ce", "hinge_ovr")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.1
    batch_size: int = 128
    weight_decay: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True, eq=False)
class LinearHead:
    weights: np.ndarray
    biases: np.ndarray
    loss_kind: str = "softmax_ce"
    # mean training loss per epoch; not serialized
    history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.loss_kind!r}")
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.biases, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise DataError(f"weights {w.shape} and biases {b.shape} disagree")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NumericalError("head parameters are not finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.dim:
            raise DataError(f"feature dim {features.shape[-1]} does not match head dim {self.dim}")
        return features @ self.weights.T + self.biases

    def to_json(self) -> dict:
        return {
            "C": self.class_count,
            "d": self.dim,
            "loss": self.loss_kind,
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LinearHead":
        try:
            head = cls(np.array(doc["weights"]), np.array(doc["biases"]), doc["loss"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed head document: {exc}") from exc
        if head.weights.shape != (doc["C"], doc["d"]):
            raise DataError(f"head declares C={doc['C']}, d={doc['d']} but weights are {head.weights.shape}")
        return head

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LinearHead":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read head {path}: {exc}") from exc
        return cls.from_json(doc)


def init_head(C: int, d: int, seed: int, loss_kind: str = "softmax_ce") -> LinearHead:
    """Weights ~ U(-1/sqrt(d), 1/sqrt(d)), zero biases."""
    bound = 1.0 / math.sqrt(d)
    weights = np.random.default_rng(seed).uniform(-bound, bound, size=(C, d))
    return LinearHead(weights, np.zeros(C), loss_kind)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_grad(weights, biases, X, y, weight_decay=0.0):
    """Mean softmax cross-entropy plus ``weight_decay/2 * |W|^2``, and its gradients."""
    logits = X @ weights.T + biases
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    n = X.shape[0]
    loss = float(np.mean(log_norm - z[np.arange(n), y])) + 0.5 * weight_decay * float(np.sum(weights**2))
    delta = np.exp(z - log_norm[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, delta.T @ X + weight_decay * weights, delta.sum(axis=0)


def hinge_grad(weights, biases, X, y, weight_decay=0.0):
    """One-vs-rest hinge: mean over rows of ``sum_c max(0, 1 - t_ic * m_ic)`` plus L2.

    ``t_ic`` is +1 for the true class and -1 otherwise. At the kink the
    subgradient of zero is used.
    """
    margins = X @ weights.T + biases
    n = X.shape[0]
    targets = -np.ones_like(margins)
    targets[np.arange(n), y] = 1.0
    slack = 1.0 - targets * margins
    active = slack > 0
    loss = float(np.sum(slack[active]) / n) + 0.5 * weight_decay * float(np.sum(weights**2))
    delta = np.where(active, -targets, 0.0) / n
    return loss, delta.T @ X + weight_decay * weights, delta.sum(axis=0)


_GRADIENTS = {"softmax_ce": cross_entropy_grad, "hinge_ovr": hinge_grad}


def _sgd(head: LinearHead, dataset: LabeledEmbeddingSet, config: TrainConfig) -> LinearHead:
    if dataset.n == 0:
        raise DataError("cannot train on an empty set")
    if (dataset.class_count, dataset.dim) != head.weights.shape:
        raise DataError(
            f"head shape {head.weights.shape} does not match set (C={dataset.class_count}, d={dataset.dim})"
        )
    grad_fn = _GRADIENTS[head.loss_kind]
    W = head.weights.copy()
    b = head.biases.copy()
    X, y = dataset.features, dataset.labels
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(dataset.n)
        total = 0.0
        for batch, start in enumerate(range(0, dataset.n, config.batch_size)):
            rows = order[start:start + config.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gW, gb = grad_fn(W, b, X[rows], y[rows], config.weight_decay)
                W -= config.learning_rate * gW
                b -= config.learning_rate * gb
            if not (math.isfinite(loss) and np.isfinite(W).all() and np.isfinite(b).all()):
                raise NumericalError(f"non-finite loss or parameters at epoch {epoch}, batch {batch}")
            total += loss * len(rows)
        history.append(total / dataset.n)
    return LinearHead(W, b, head.loss_kind, tuple(history))


def train_head(dataset: LabeledEmbeddingSet, config: TrainConfig) -> LinearHead:
    """Softmax cross-entropy head trained from a seeded fan-in initialization."""
    return _sgd(init_head(dataset.class_count, dataset.dim, config.seed), dataset, config)


def fine_tune(head: LinearHead, dataset: LabeledEmbeddingSet, config: TrainConfig) -> LinearHead:
    """Continue SGD from ``head``'s current parameters."""
    return _sgd(head, dataset, config)


def train_svm(dataset: LabeledEmbeddingSet, config: TrainConfig) -> LinearHead:
    """One-vs-rest linear SVM by stochastic subgradient descent on the hinge loss."""
    return _sgd(init_head(dataset.class_count, dataset.dim, config.seed, "hinge_ovr"), dataset, config)


def predict(head: LinearHead, features, return_proba: bool = False):
    logits = head.logits(features)
    labels = np.argmax(logits, axis=1)
    if return_proba:
        return labels, softmax(logits)
    return labels


def classification_layer_embeddings(head: LinearHead, features) -> np.ndarray:
    """Per-row ``(C, d)`` products ``x[f] * W[c, f]`` before they are summed into logits."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != head.dim:
        raise DataError(f"feature dim {features.shape[-1]} does not match head dim {head.dim}")
    return features[:, None, :] * head.weights[None, :, :]


def weight_norms(head: LinearHead) -> np.ndarray:
    return np.linalg.norm(head.weights, axis=1)
