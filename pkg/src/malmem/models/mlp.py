"""Fully connected feed-forward network trained with exact backpropagation.

Hidden layers use ReLU, the output layer softmax, and the loss is the mean
cross-entropy of the batch.  Weights start from the Glorot uniform range
sqrt(6 / (fan_in + fan_out)); biases start at zero.  Training runs
mini-batch Adam (or plain SGD) with early stopping once the full-set loss
stops improving.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import STREAM_MLP, substream
from .common import mean_cross_entropy, one_hot, softmax


@dataclass(frozen=True)
class MlpParams:
    hidden: tuple[int, ...] = (100,)
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 200
    max_epochs: int = 200
    improvement_tol: float = 1e-6
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden sizes must all be >= 1, got {self.hidden}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, and patience must all be >= 1")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass
class MlpModel:
    """Fitted network: weights[i] maps layer i to layer i+1."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    n_classes: int
    params: MlpParams
    train_loss: list[float] = field(default_factory=list)
    epochs_run: int = 0

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *[w.shape[1] for w in self.weights])

    def predict_proba(self, X) -> np.ndarray:
        return _forward(self.weights, self.biases, np.atleast_2d(np.asarray(X, dtype=np.float64)))[-1]

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


def _init_layers(sizes: tuple[int, ...], seed: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    rng = substream(seed, STREAM_MLP)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights, biases, X) -> list[np.ndarray]:
    """Activations per layer; the last entry is the softmax output."""
    acts = [X]
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ w + b
        acts.append(softmax(z) if i == len(weights) - 1 else np.maximum(z, 0.0))
    return acts


def mlp_forward(model: MlpModel, row) -> np.ndarray:
    """Output distribution for a single feature vector."""
    return model.predict_proba(np.asarray(row, dtype=np.float64)[None, :])[0]


def mlp_gradients(weights, biases, X, target) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of the mean cross-entropy over the batch.

    With softmax outputs the error at the top is (output - target) / batch;
    ReLU layers propagate it masked by their active units.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    acts = _forward(weights, biases, X)
    batch = X.shape[0]
    delta = (acts[-1] - target) / batch
    grad_w = [np.empty(0)] * len(weights)
    grad_b = [np.empty(0)] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (acts[i] > 0.0)
    return grad_w, grad_b


def fit_mlp(X, y, params: MlpParams = MlpParams(), n_classes: int | None = None) -> MlpModel:
    """Train until max_epochs or until the loss improvement stays below
    ``improvement_tol`` for ``patience`` consecutive epochs."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a non-empty (n, d) matrix with aligned labels")
    c = n_classes if n_classes is not None else int(y.max()) + 1
    n = X.shape[0]
    target = one_hot(y, c)
    sizes = (X.shape[1], *params.hidden, c)
    weights, biases = _init_layers(sizes, params.seed)
    model = MlpModel(weights=weights, biases=biases, n_classes=c, params=params)

    rng = substream(params.seed, STREAM_MLP, 1)
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0
    best_loss = np.inf
    stale_epochs = 0

    for epoch in range(params.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            batch = order[start : start + params.batch_size]
            grad_w, grad_b = mlp_gradients(weights, biases, X[batch], target[batch])
            if params.optimizer == "sgd":
                for i in range(len(weights)):
                    weights[i] -= params.learning_rate * grad_w[i]
                    biases[i] -= params.learning_rate * grad_b[i]
                continue
            step += 1
            bias_fix1 = 1.0 - params.beta1 ** step
            bias_fix2 = 1.0 - params.beta2 ** step
            for i in range(len(weights)):
                m_w[i] = params.beta1 * m_w[i] + (1 - params.beta1) * grad_w[i]
                v_w[i] = params.beta2 * v_w[i] + (1 - params.beta2) * grad_w[i] ** 2
                m_b[i] = params.beta1 * m_b[i] + (1 - params.beta1) * grad_b[i]
                v_b[i] = params.beta2 * v_b[i] + (1 - params.beta2) * grad_b[i] ** 2
                weights[i] -= params.learning_rate * (m_w[i] / bias_fix1) / (
                    np.sqrt(v_w[i] / bias_fix2) + params.adam_eps
                )
                biases[i] -= params.learning_rate * (m_b[i] / bias_fix1) / (
                    np.sqrt(v_b[i] / bias_fix2) + params.adam_eps
                )

        loss = mean_cross_entropy(target, _forward(weights, biases, X)[-1])
        model.train_loss.append(loss)
        model.epochs_run = epoch + 1
        if best_loss - loss < params.improvement_tol:
            stale_epochs += 1
            if stale_epochs >= params.patience:
                break
        else:
            stale_epochs = 0
        best_loss = min(best_loss, loss)
    return model


def predict_mlp(model: MlpModel, X) -> np.ndarray:
    return model.predict(X)


def predict_mlp_proba(model: MlpModel, X) -> np.ndarray:
    return model.predict_proba(X)
