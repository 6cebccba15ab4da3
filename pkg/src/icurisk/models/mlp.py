"""Small feed-forward network for binary classification.

Rectifier hidden layers, logistic output, binary cross-entropy loss,
mini-batch gradient descent with seeded Glorot-uniform initialization.
`loss_and_grads` exposes the exact training gradient so finite-difference
checks can run against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DivergenceError


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (32,)
    step: float = 0.05
    epochs: int = 200
    batch: int = 64
    seed: int = 0

    def __post_init__(self):
        if len(self.hidden) == 0:
            raise ConfigError("at least one hidden layer is required; "
                              "use the logistic family for a linear model")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden layer sizes must be >= 1")
        if self.step <= 0:
            raise ConfigError("step must be > 0")
        if self.epochs < 1 or self.batch < 1:
            raise ConfigError("epochs and batch must be >= 1")


@dataclass
class MlpModel:
    sizes: tuple[int, ...]  # input, hidden..., 1
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    epochs_run: int = 0
    final_loss: float = float("nan")

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(x, dtype=float)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        z = (a @ self.weights[-1] + self.biases[-1]).ravel()
        return _sigmoid(z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_parameters(sizes: tuple[int, ...],
                    seed: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Glorot-uniform weights (+- sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def loss_and_grads(weights: list[np.ndarray], biases: list[np.ndarray],
                   x: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy and its gradients on one batch."""
    n = x.shape[0]
    activations = [np.asarray(x, dtype=float)]
    for w, b in zip(weights[:-1], biases[:-1]):
        activations.append(np.maximum(activations[-1] @ w + b, 0.0))
    z = (activations[-1] @ weights[-1] + biases[-1]).ravel()
    # BCE via logits: softplus(z) - y*z, stable for large |z|.
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))

    delta = ((_sigmoid(z) - y) / n)[:, None]
    grad_w = [np.zeros_like(w) for w in weights]
    grad_b = [np.zeros_like(b) for b in biases]
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (activations[layer] > 0.0)
    return loss, grad_w, grad_b


def train_mlp(x: np.ndarray, labels: np.ndarray,
              config: MlpConfig = MlpConfig()) -> MlpModel:
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels, dtype=float)
    sizes = (x.shape[1],) + tuple(config.hidden) + (1,)
    weights, biases = init_parameters(sizes, config.seed)
    rng = np.random.default_rng(config.seed + 1)

    loss = float("nan")
    for epoch in range(config.epochs):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], config.batch):
            batch = order[start:start + config.batch]
            loss, grad_w, grad_b = loss_and_grads(weights, biases, x[batch], y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(f"mlp loss became non-finite at epoch {epoch}")
            for layer in range(len(weights)):
                weights[layer] -= config.step * grad_w[layer]
                biases[layer] -= config.step * grad_b[layer]
    final_loss, _, _ = loss_and_grads(weights, biases, x, y)
    if not np.isfinite(final_loss):
        raise DivergenceError("mlp training diverged")
    return MlpModel(sizes=sizes, weights=weights, biases=biases,
                    epochs_run=config.epochs, final_loss=final_loss)
