"""Shapley-value attribution: exact enumeration, permutation sampling, and
the path-dependent tree game.

The model-agnostic value function is the interventional expectation over a
background sample: f(S) is the mean prediction over hybrid rows that take the
explained row's values on S and a background row's values elsewhere. The
tree game instead descends both children of a split on an absent feature,
weighted by training-row coverage, which needs no background at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError
from ..models.forest import ForestModel
from ..models.tree import TreeModel, TreeNode
from ..preprocess import FeatureMatrix

EXACT_FEATURE_GUARD = 20

PredictFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BackgroundSet:
    """Training rows used to marginalize absent features."""

    rows: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.rows.shape[0]


def sample_background(matrix: FeatureMatrix, size: int = 100,
                      seed: int = 0) -> BackgroundSet:
    """Draw up to `size` rows (without replacement) from a training matrix."""
    rng = np.random.default_rng(seed)
    n = matrix.n_rows
    if n <= size:
        return BackgroundSet(rows=matrix.values.copy(), seed=seed)
    idx = np.sort(rng.choice(n, size=size, replace=False))
    return BackgroundSet(rows=matrix.values[idx], seed=seed)


@dataclass
class Attribution:
    """Base value, per-feature contributions, and the explained prediction."""

    base_value: float
    phi: np.ndarray
    prediction: float
    feature_names: tuple[str, ...]
    display_values: tuple
    mode: str  # "exact" | "sampled" | "tree"
    std_errors: np.ndarray | None = None
    n_evaluations: int = 0

    @property
    def tolerance(self) -> float:
        """Reported uncertainty: zero for exact modes, max standard error else."""
        if self.std_errors is None:
            return 0.0
        return float(np.max(self.std_errors)) if self.std_errors.size else 0.0

    def efficiency_gap(self) -> float:
        return abs(self.base_value + float(self.phi.sum()) - self.prediction)


def _background_rows(background) -> np.ndarray:
    rows = background.rows if isinstance(background, BackgroundSet) else np.asarray(background)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ConfigError("background must be a non-empty 2-D array of rows")
    return rows


def _names(feature_names, p: int) -> tuple[str, ...]:
    if feature_names is None:
        return tuple(f"x{i}" for i in range(p))
    return tuple(feature_names)


def _displays(display_values, row: np.ndarray) -> tuple:
    if display_values is None:
        return tuple(float(v) for v in row)
    return tuple(display_values)


def shapley_weights(p: int) -> np.ndarray:
    """w[s] = s! (p - s - 1)! / p! for subset size s."""
    fact = [math.factorial(i) for i in range(p + 1)]
    return np.array([fact[s] * fact[p - s - 1] / fact[p] for s in range(p)])


def shapley_exact(predict: PredictFn, row: np.ndarray, background,
                  feature_names: Sequence[str] | None = None,
                  display_values: Sequence | None = None,
                  guard: int = EXACT_FEATURE_GUARD,
                  chunk_rows: int = 200_000) -> Attribution:
    """Exact Shapley values by full subset enumeration (2^p evaluations)."""
    row = np.asarray(row, dtype=float).ravel()
    p = row.size
    if p > guard:
        raise ConfigError(
            f"{p} features exceeds the exact-enumeration guard ({guard}); "
            "use shapley_sampled")
    bg = _background_rows(background)
    n_masks = 1 << p
    bits = np.array([(np.arange(n_masks) >> i) & 1 for i in range(p)],
                    dtype=bool).T  # (n_masks, p)

    f = np.empty(n_masks)
    masks_per_chunk = max(1, chunk_rows // bg.shape[0])
    for start in range(0, n_masks, masks_per_chunk):
        chunk = bits[start:start + masks_per_chunk]
        hybrids = np.where(chunk[:, None, :], row[None, None, :], bg[None, :, :])
        preds = predict(hybrids.reshape(-1, p))
        f[start:start + masks_per_chunk] = preds.reshape(chunk.shape[0], -1).mean(axis=1)

    weights = shapley_weights(p)
    popcount = bits.sum(axis=1)
    all_masks = np.arange(n_masks)
    phi = np.zeros(p)
    for i in range(p):
        without = all_masks[~bits[:, i]]
        phi[i] = float(np.sum(weights[popcount[without]]
                              * (f[without | (1 << i)] - f[without])))
    return Attribution(base_value=float(f[0]), phi=phi,
                       prediction=float(f[n_masks - 1]),
                       feature_names=_names(feature_names, p),
                       display_values=_displays(display_values, row),
                       mode="exact", n_evaluations=n_masks)


def _permutations(rng: np.random.Generator, n: int, p: int,
                  antithetic: bool) -> np.ndarray:
    """n permutations; antithetic pairs each random draw with its reverse."""
    if not antithetic:
        return np.array([rng.permutation(p) for _ in range(n)])
    perms = []
    while len(perms) < n:
        perm = rng.permutation(p)
        perms.append(perm)
        if len(perms) < n:
            perms.append(perm[::-1].copy())
    return np.array(perms[:n])


def sampled_phi_batch(predict: PredictFn, rows: np.ndarray, background,
                      n_permutations: int = 200, seed: int = 0,
                      antithetic: bool = True) -> np.ndarray:
    """Mean sampled Shapley vector per row, sharing permutations across rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    bg = _background_rows(background)
    r, p = rows.shape
    rng = np.random.default_rng(seed)
    perms = _permutations(rng, n_permutations, p, antithetic)
    base = float(predict(bg).mean())
    phi_total = np.zeros((r, p))
    tri = np.tril(np.ones((p, p), dtype=bool))
    for perm in perms:
        masks = np.zeros((p, p), dtype=bool)
        masks[:, perm] = tri  # step j includes the first j+1 features of perm
        hybrids = np.where(masks[:, None, None, :], rows[None, :, None, :],
                           bg[None, None, :, :])
        preds = predict(hybrids.reshape(-1, p)).reshape(p, r, bg.shape[0])
        f_steps = preds.mean(axis=2)  # (p, r)
        prev = np.full(r, base)
        for j in range(p):
            phi_total[:, perm[j]] += f_steps[j] - prev
            prev = f_steps[j]
    return phi_total / n_permutations


def shapley_sampled(predict: PredictFn, row: np.ndarray, background,
                    n_permutations: int = 200, seed: int = 0,
                    antithetic: bool = True,
                    feature_names: Sequence[str] | None = None,
                    display_values: Sequence | None = None) -> Attribution:
    """Permutation-sampling estimator with per-feature standard errors.

    Each permutation contributes one marginal f(prefix + i) - f(prefix) per
    feature, i.e. n_permutations * p value-function evaluations in total
    (batched physically, counted logically in `n_evaluations`).
    """
    if n_permutations < 1:
        raise ConfigError("n_permutations must be >= 1")
    row = np.asarray(row, dtype=float).ravel()
    p = row.size
    bg = _background_rows(background)
    rng = np.random.default_rng(seed)
    perms = _permutations(rng, n_permutations, p, antithetic)
    base = float(predict(bg).mean())
    prediction = float(predict(row[None, :])[0])

    marginals = np.zeros((n_permutations, p))
    tri = np.tril(np.ones((p, p), dtype=bool))
    for idx, perm in enumerate(perms):
        masks = np.zeros((p, p), dtype=bool)
        masks[:, perm] = tri
        hybrids = np.where(masks[:, None, :], row[None, None, :], bg[None, :, :])
        f_steps = predict(hybrids.reshape(-1, p)).reshape(p, -1).mean(axis=1)
        prev = base
        for j in range(p):
            marginals[idx, perm[j]] = f_steps[j] - prev
            prev = f_steps[j]

    phi = marginals.mean(axis=0)
    # Antithetic pairs are dependent; the independent units are pair means.
    if antithetic and n_permutations >= 2:
        n_pairs = n_permutations // 2
        units = marginals[:2 * n_pairs].reshape(n_pairs, 2, p).mean(axis=1)
        if n_permutations % 2:
            units = np.vstack([units, marginals[-1:]])
    else:
        units = marginals
    if units.shape[0] > 1:
        std_errors = units.std(axis=0, ddof=1) / math.sqrt(units.shape[0])
    else:
        std_errors = np.full(p, np.inf)
    return Attribution(base_value=base, phi=phi, prediction=prediction,
                       feature_names=_names(feature_names, p),
                       display_values=_displays(display_values, row),
                       mode="sampled", std_errors=std_errors,
                       n_evaluations=n_permutations * p)


# ---------------------------------------------------------------------------
# Path-dependent tree attribution


@dataclass(frozen=True)
class _LeafGame:
    """One leaf's contribution: value times per-feature match-or-coverage."""

    value: float
    feature_cols: np.ndarray      # distinct matrix columns on the path
    coverage: np.ndarray          # per distinct feature: product of coverages
    step_feature: np.ndarray      # per path step: index into feature_cols
    step_threshold: np.ndarray
    step_go_left: np.ndarray
    base_weight: float            # value * prod(coverage)


def _tree_games(tree: TreeModel) -> list[_LeafGame]:
    games: list[_LeafGame] = []

    def walk(node: TreeNode, steps: list[tuple[int, float, bool, float]]) -> None:
        if node.is_leaf:
            cols: list[int] = []
            col_index: dict[int, int] = {}
            for col, _, _, _ in steps:
                if col not in col_index:
                    col_index[col] = len(cols)
                    cols.append(col)
            coverage = np.ones(len(cols))
            for col, _, _, frac in steps:
                coverage[col_index[col]] *= frac
            games.append(_LeafGame(
                value=node.probability,
                feature_cols=np.array(cols, dtype=int),
                coverage=coverage,
                step_feature=np.array([col_index[c] for c, _, _, _ in steps], dtype=int),
                step_threshold=np.array([t for _, t, _, _ in steps]),
                step_go_left=np.array([g for _, _, g, _ in steps], dtype=bool),
                base_weight=node.probability * float(np.prod(coverage))))
            return
        left_frac = node.left.n_rows / node.n_rows
        walk(node.left, steps + [(node.column, node.threshold, True, left_frac)])
        walk(node.right, steps + [(node.column, node.threshold, False, 1.0 - left_frac)])

    walk(tree.root, [])
    return games


def _mask_tables(max_d: int):
    tables = {}
    for d in range(0, max_d + 1):
        bits = np.array([(np.arange(1 << d) >> i) & 1 for i in range(d)],
                        dtype=bool).T if d else np.zeros((1, 0), dtype=bool)
        tables[d] = (bits, bits.sum(axis=1), shapley_weights(d) if d else None)
    return tables


def _tree_phi(games: list[_LeafGame], row: np.ndarray, n_columns: int,
              tables) -> tuple[float, np.ndarray]:
    phi = np.zeros(n_columns)
    base = 0.0
    for game in games:
        base += game.base_weight
        d = game.feature_cols.size
        if d == 0:
            continue
        step_ok = (row[game.feature_cols[game.step_feature]]
                   <= game.step_threshold) == game.step_go_left
        match = np.ones(d, dtype=bool)
        np.logical_and.at(match, game.step_feature, step_ok)
        bits, popcount, weights = tables[d]
        factors = np.where(bits, match[None, :].astype(float),
                           game.coverage[None, :])
        g = game.value * factors.prod(axis=1)
        masks = np.arange(1 << d)
        for i in range(d):
            without = masks[~bits[:, i]]
            phi[game.feature_cols[i]] += float(
                np.sum(weights[popcount[without]] * (g[without | (1 << i)] - g[without])))
    return base, phi


def tree_shapley(model: TreeModel | ForestModel, row: np.ndarray,
                 feature_names: Sequence[str] | None = None,
                 display_values: Sequence | None = None) -> Attribution:
    """Exact Shapley values of the path-dependent tree game.

    Splits on features outside the coalition descend both children weighted
    by training coverage. Enumeration runs per leaf over its path's distinct
    features (at most the tree depth), so depth-limited trees stay cheap.
    """
    row = np.asarray(row, dtype=float).ravel()
    trees = model.trees if isinstance(model, ForestModel) else [model]
    n_columns = trees[0].n_columns
    tables = _mask_tables(max(t.max_depth for t in trees))
    base_total = 0.0
    phi_total = np.zeros(n_columns)
    for tree in trees:
        base, phi = _tree_phi(_tree_games(tree), row, n_columns, tables)
        base_total += base
        phi_total += phi
    k = len(trees)
    base_total /= k
    phi_total /= k
    prediction = float(model.predict_proba_matrix(row[None, :])[0])
    return Attribution(base_value=base_total, phi=phi_total,
                       prediction=prediction,
                       feature_names=_names(feature_names, n_columns),
                       display_values=_displays(display_values, row),
                       mode="tree", n_evaluations=0)


def tree_shapley_batch(model: TreeModel | ForestModel,
                       rows: np.ndarray) -> tuple[float, np.ndarray]:
    """(base, phi per row) for many rows, reusing the per-leaf structures."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    trees = model.trees if isinstance(model, ForestModel) else [model]
    n_columns = trees[0].n_columns
    tables = _mask_tables(max(t.max_depth for t in trees))
    base_total = 0.0
    phi_total = np.zeros((rows.shape[0], n_columns))
    for tree in trees:
        games = _tree_games(tree)
        for r in range(rows.shape[0]):
            base, phi = _tree_phi(games, rows[r], n_columns, tables)
            phi_total[r] += phi
            if r == 0:
                base_total += base
    k = len(trees)
    return base_total / k, phi_total / k
