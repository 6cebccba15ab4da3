"""Greedy binary classification tree minimizing Gini impurity.

Split candidates are midpoints between consecutive distinct sorted values;
ties in gain resolve to the lowest column index, then the lowest threshold,
so training is fully deterministic. Rows with value <= threshold go left.
Leaf probabilities are raw positive fractions, no smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 5
    min_leaf: int = 1
    max_features: int | None = None  # per-split random subset when set

    def __post_init__(self):
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")


@dataclass
class TreeNode:
    n_rows: int
    counts: tuple[int, int]
    impurity: float
    probability: float
    column: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.column is None


@dataclass
class TreeModel:
    root: TreeNode
    n_columns: int
    max_depth: int

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[0])
        self._fill(self.root, x, np.arange(x.shape[0]), out)
        return out

    def _fill(self, node: TreeNode, x: np.ndarray, rows: np.ndarray,
              out: np.ndarray) -> None:
        if node.is_leaf:
            out[rows] = node.probability
            return
        left = x[rows, node.column] <= node.threshold
        self._fill(node.left, x, rows[left], out)
        self._fill(node.right, x, rows[~left], out)

    def depth(self) -> int:
        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def internal_nodes(self) -> list[TreeNode]:
        nodes = []

        def walk(node: TreeNode) -> None:
            if not node.is_leaf:
                nodes.append(node)
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return nodes


def gini(counts: tuple[int, int]) -> float:
    """1 - p0^2 - p1^2 for a node's class counts."""
    total = counts[0] + counts[1]
    if total == 0:
        return 0.0
    p0 = counts[0] / total
    p1 = counts[1] / total
    return 1.0 - p0 * p0 - p1 * p1


def _best_split(x: np.ndarray, y: np.ndarray, rows: np.ndarray,
                columns: np.ndarray, min_leaf: int):
    """Best (gain, column, threshold) over candidate columns, or None.

    Zero-gain splits are allowed: stopping is governed by depth, purity, and
    min_leaf only. Parity-style data (e.g. 2-D XOR) has no positive-gain root
    split yet is separable two levels down.
    """
    n = rows.size
    y_rows = y[rows]
    pos_total = int(y_rows.sum())
    parent = gini((n - pos_total, pos_total))
    best = None
    for col in columns:
        v = x[rows, col]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ys = y_rows[order]
        boundaries = np.flatnonzero(vs[:-1] != vs[1:])
        if boundaries.size == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        boundaries = boundaries[valid]
        n_left = n_left[valid]
        n_right = n_right[valid]
        pos_left = np.cumsum(ys)[boundaries]
        pos_right = pos_total - pos_left
        p1l = pos_left / n_left
        p0l = 1.0 - p1l
        p1r = pos_right / n_right
        p0r = 1.0 - p1r
        gini_left = 1.0 - p0l * p0l - p1l * p1l
        gini_right = 1.0 - p0r * p0r - p1r * p1r
        gains = parent - (n_left * gini_left + n_right * gini_right) / n
        i = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[i])
        if best is None or gain > best[0]:
            threshold = 0.5 * (vs[boundaries[i]] + vs[boundaries[i] + 1])
            best = (gain, int(col), float(threshold))
    return best


def _build(x: np.ndarray, y: np.ndarray, rows: np.ndarray, depth: int,
           config: TreeConfig, rng: np.random.Generator | None) -> TreeNode:
    n = rows.size
    pos = int(y[rows].sum())
    counts = (n - pos, pos)
    node = TreeNode(n_rows=n, counts=counts, impurity=gini(counts),
                    probability=pos / n)
    if depth >= config.max_depth or pos in (0, n) or n < 2 * config.min_leaf:
        return node
    p = x.shape[1]
    if config.max_features is not None and config.max_features < p:
        if rng is None:
            raise ConfigError("max_features requires a random generator")
        columns = np.sort(rng.choice(p, size=config.max_features, replace=False))
    else:
        columns = np.arange(p)
    split = _best_split(x, y, rows, columns, config.min_leaf)
    if split is None:
        return node
    _, node.column, node.threshold = split
    left = rows[x[rows, node.column] <= node.threshold]
    right = rows[x[rows, node.column] > node.threshold]
    node.left = _build(x, y, left, depth + 1, config, rng)
    node.right = _build(x, y, right, depth + 1, config, rng)
    return node


def train_tree(x: np.ndarray, labels: np.ndarray,
               config: TreeConfig = TreeConfig(),
               rng: np.random.Generator | None = None) -> TreeModel:
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if x.shape[0] < 1:
        raise ConfigError("need at least one training row")
    root = _build(x, labels, np.arange(x.shape[0]), 0, config, rng)
    return TreeModel(root=root, n_columns=x.shape[1], max_depth=config.max_depth)


def gini_decreases(model: TreeModel) -> np.ndarray:
    """Unnormalized per-column Gini importance.

    Each internal node adds (node_rows / total_rows) times the impurity
    decrease of its split to its column's total.
    """
    out = np.zeros(model.n_columns)
    total = model.root.n_rows

    def walk(node: TreeNode) -> None:
        if node.is_leaf:
            return
        child = (node.left.n_rows * node.left.impurity
                 + node.right.n_rows * node.right.impurity) / node.n_rows
        # clamp: zero-gain splits can compute as -1e-17 in floats
        out[node.column] += (node.n_rows / total) * max(node.impurity - child, 0.0)
        walk(node.left)
        walk(node.right)

    walk(model.root)
    return out
