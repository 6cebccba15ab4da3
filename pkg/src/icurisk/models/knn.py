"""Feature-weighted k-nearest-neighbors classifier.

Distance is a weighted squared Euclidean metric; weights usually come from a
forest's Gini importances so that irrelevant columns stop dominating the
geometry. Neighbor ties resolve to the lower training-row index. The
predicted probability is the raw positive fraction among the k neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class KnnConfig:
    k: int = 16
    weights: np.ndarray | None = None  # None means uniform

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")


@dataclass
class KnnModel:
    x: np.ndarray
    labels: np.ndarray
    k: int
    weights: np.ndarray

    def kneighbors(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of the k nearest rows per query."""
        queries = np.asarray(queries, dtype=float)
        if queries.ndim == 1:
            queries = queries[None, :]
        xw = self.x * self.weights
        sq_x = np.sum(self.x * xw, axis=1)
        indices = np.empty((queries.shape[0], self.k), dtype=int)
        distances = np.empty((queries.shape[0], self.k))
        chunk = max(1, int(2e7 // max(self.x.shape[0], 1)))
        for start in range(0, queries.shape[0], chunk):
            q = queries[start:start + chunk]
            sq_q = np.sum(q * q * self.weights, axis=1)
            d = sq_q[:, None] + sq_x[None, :] - 2.0 * (q @ xw.T)
            np.maximum(d, 0.0, out=d)
            order = np.argsort(d, axis=1, kind="stable")[:, :self.k]
            indices[start:start + chunk] = order
            distances[start:start + chunk] = np.take_along_axis(d, order, axis=1)
        return indices, distances

    def predict_proba_matrix(self, queries: np.ndarray) -> np.ndarray:
        indices, _ = self.kneighbors(queries)
        return self.labels[indices].mean(axis=1)


def train_knn(x: np.ndarray, labels: np.ndarray,
              config: KnnConfig = KnnConfig()) -> KnnModel:
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if config.k > x.shape[0]:
        raise ConfigError(f"k={config.k} exceeds {x.shape[0]} training rows")
    if config.weights is None:
        weights = np.ones(x.shape[1])
    else:
        weights = np.asarray(config.weights, dtype=float)
        if weights.shape != (x.shape[1],):
            raise ConfigError("weights length must equal the column count")
        if (weights < 0).any():
            raise ConfigError("weights must be non-negative")
        if not (weights > 0).any():
            raise ConfigError("weights must not be all zero")
    return KnnModel(x=x, labels=labels, k=config.k, weights=weights)
