"""L1-regularizable logistic regression trained by proximal gradient descent.

The objective is the sum over records of log(1 + exp(-s (x'w + b))) with
s in {-1, +1}, plus lambda * ||w||_1; the offset b is never penalized. The
soft-threshold step produces exact zeros, so sufficiently large lambda
annihilates features outright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DivergenceError


@dataclass(frozen=True)
class LogisticConfig:
    l1_lambda: float = 0.0
    step: float | None = None  # None picks 1/L from a power-iteration bound
    epochs: int = 500
    tol: float = 1e-9
    backtracking: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.l1_lambda < 0:
            raise ConfigError("l1_lambda must be >= 0")
        if self.step is not None and self.step <= 0:
            raise ConfigError("step must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l1_lambda: float
    epochs_run: int
    step: float
    converged: bool
    objective: float

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.intercept

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_values(x))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _loss(x: np.ndarray, s: np.ndarray, w: np.ndarray, b: float) -> float:
    margins = s * (x @ w + b)
    return float(np.sum(np.logaddexp(0.0, -margins)))


def _grads(x: np.ndarray, s: np.ndarray, w: np.ndarray,
           b: float) -> tuple[np.ndarray, float]:
    margins = s * (x @ w + b)
    coef = s * _sigmoid(-margins)
    return -(x.T @ coef), float(-np.sum(coef))


def lambda_max(x: np.ndarray, labels: np.ndarray) -> float:
    """Smallest penalty that keeps every feature weight at exactly zero.

    Computed as the max absolute loss gradient at the origin; exact for
    balanced classes, where the optimal unpenalized offset is zero.
    """
    s = np.where(np.asarray(labels) == 1, 1.0, -1.0)
    grad_w, _ = _grads(np.asarray(x, dtype=float), s, np.zeros(x.shape[1]), 0.0)
    return float(np.max(np.abs(grad_w)))


def _lipschitz_bound(x: np.ndarray, seed: int) -> float:
    """0.25 * largest eigenvalue of [X 1]'[X 1], by power iteration."""
    ext = np.hstack([x, np.ones((x.shape[0], 1))])
    rng = np.random.default_rng(seed)
    v = rng.normal(size=ext.shape[1])
    v /= np.linalg.norm(v)
    eig = 1.0
    for _ in range(60):
        av = ext.T @ (ext @ v)
        norm = np.linalg.norm(av)
        if norm == 0.0:
            return 0.25
        eig = norm
        v = av / norm
    return 0.25 * eig


def train_logistic(x: np.ndarray, labels: np.ndarray,
                   config: LogisticConfig = LogisticConfig()) -> LogisticModel:
    """Minimize the L1-penalized logistic loss; deterministic full-batch."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    s = np.where(labels == 1, 1.0, -1.0)
    n, p = x.shape
    w = np.zeros(p)
    b = 0.0
    step = config.step if config.step is not None else 1.0 / max(
        _lipschitz_bound(x, config.seed), 1e-12)

    objective = _loss(x, s, w, b) + config.l1_lambda * float(np.sum(np.abs(w)))
    converged = False
    epochs_run = 0
    for epoch in range(config.epochs):
        epochs_run = epoch + 1
        grad_w, grad_b = _grads(x, s, w, b)
        alpha = step
        while True:
            w_new = _soft_threshold(w - alpha * grad_w, alpha * config.l1_lambda)
            b_new = b - alpha * grad_b
            smooth_new = _loss(x, s, w_new, b_new)
            if not np.isfinite(smooth_new):
                raise DivergenceError("logistic loss became non-finite; reduce the step size")
            if not config.backtracking:
                break
            # Quadratic-majorization check for the smooth part.
            dw = w_new - w
            db = b_new - b
            smooth_old = _loss(x, s, w, b)
            bound = smooth_old + grad_w @ dw + grad_b * db \
                + (dw @ dw + db * db) / (2.0 * alpha)
            if smooth_new <= bound + 1e-12 or alpha < 1e-12:
                break
            alpha *= 0.5
        w, b = w_new, b_new
        new_objective = smooth_new + config.l1_lambda * float(np.sum(np.abs(w)))
        if abs(objective - new_objective) <= config.tol * max(1.0, abs(objective)):
            objective = new_objective
            converged = True
            break
        objective = new_objective
    if not np.isfinite(objective):
        raise DivergenceError("logistic loss became non-finite; reduce the step size")
    return LogisticModel(weights=w, intercept=float(b), l1_lambda=config.l1_lambda,
                         epochs_run=epochs_run, step=step, converged=converged,
                         objective=float(objective))
