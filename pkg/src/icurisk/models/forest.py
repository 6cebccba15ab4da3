"""Bootstrap ensemble of Gini trees with per-split feature subsampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .tree import TreeConfig, TreeModel, gini_decreases, train_tree


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 5
    min_leaf: int = 1
    max_features: int | str | None = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")


def resolve_max_features(spec: int | str | None, p: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(p)))
    if isinstance(spec, int) and spec >= 1:
        return min(spec, p)
    raise ConfigError(f"invalid max_features {spec!r}")


@dataclass
class ForestModel:
    trees: list[TreeModel]
    n_columns: int
    seed: int
    max_features: int | None
    bootstrap: bool

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.predict_proba_matrix(x)
        return total / len(self.trees)


def train_forest(x: np.ndarray, labels: np.ndarray,
                 config: ForestConfig = ForestConfig()) -> ForestModel:
    """Train n_trees trees on bootstrap samples; tree i uses seed + i.

    Per-tree seeds are derived additively so results do not depend on
    training order.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n, p = x.shape
    max_features = resolve_max_features(config.max_features, p)
    tree_config = TreeConfig(max_depth=config.max_depth, min_leaf=config.min_leaf,
                             max_features=max_features)
    trees = []
    for i in range(config.n_trees):
        rng = np.random.default_rng(config.seed + i)
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(train_tree(x[rows], labels[rows], tree_config, rng=rng))
    return ForestModel(trees=trees, n_columns=p, seed=config.seed,
                       max_features=max_features, bootstrap=config.bootstrap)


def forest_gini_decreases(model: ForestModel) -> np.ndarray:
    """Mean of the per-tree unnormalized Gini importances."""
    total = np.zeros(model.n_columns)
    for tree in model.trees:
        total += gini_decreases(tree)
    return total / len(model.trees)
