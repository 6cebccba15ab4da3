"""Minority oversampling with nominal/continuous awareness.

Synthetic minority rows are convex combinations of a random minority row and
one of its k nearest minority neighbors over the continuous columns; each
categorical feature is set to the most frequent category among those k
neighbors. The distance adds med^2 per differing categorical feature, where
med is the median of the minority class's continuous standard deviations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .preprocess import FeatureMatrix


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ConfigError("target_ratio must be in (0, 1]")


@dataclass(frozen=True)
class SyntheticProvenance:
    """How one synthetic row was built; indices refer to the input matrix."""

    parent: int
    neighbor: int
    delta: float
    neighbor_indices: tuple[int, ...]
    mode_counts: dict[str, dict[str, int]]


@dataclass(frozen=True)
class SmoteResult:
    matrix: FeatureMatrix
    n_synthetic: int
    provenance: tuple[SyntheticProvenance, ...] | None = None


def smote_nc(matrix: FeatureMatrix, config: SmoteConfig,
             with_provenance: bool = False) -> SmoteResult:
    """Append synthetic minority rows until minority/majority = target_ratio.

    Original rows are passed through unmodified as a prefix of the output;
    synthetic rows get row_id -1 and the minority label. Per synthetic row
    the RNG is consumed in a fixed order: parent, neighbor choice, delta.
    """
    if not matrix.standardized:
        raise ConfigError("smote_nc expects a standardized matrix")
    if matrix.n_cols == 0:
        raise ConfigError("matrix has no columns")

    counts = {cls: int(np.sum(matrix.labels == cls)) for cls in (0, 1)}
    minority = 1 if counts[1] <= counts[0] else 0
    majority = 1 - minority
    n_target = int(np.floor(config.target_ratio * counts[majority]))
    n_synthetic = max(0, n_target - counts[minority])
    if n_synthetic == 0:
        return SmoteResult(matrix=matrix, n_synthetic=0,
                           provenance=() if with_provenance else None)

    if counts[minority] < config.k + 1:
        raise ConfigError(
            f"minority class has {counts[minority]} rows; needs >= k+1 = {config.k + 1}")

    minority_rows = np.flatnonzero(matrix.labels == minority)
    cont = matrix.continuous_indices()
    groups = matrix.indicator_groups()

    x_cont = matrix.values[np.ix_(minority_rows, cont)] if cont.size else \
        np.zeros((minority_rows.size, 0))
    # Category index per minority row per categorical feature.
    cat_codes = np.zeros((minority_rows.size, len(groups)), dtype=int)
    for g, (_, idxs, _) in enumerate(groups):
        cat_codes[:, g] = np.argmax(matrix.values[np.ix_(minority_rows, np.array(idxs))],
                                    axis=1)

    if cont.size:
        med = float(np.median(x_cont.std(axis=0)))
    else:
        med = 1.0
    med_sq = med * med

    rng = np.random.default_rng(config.seed)
    neighbor_cache: dict[int, np.ndarray] = {}

    def neighbors_of(local: int) -> np.ndarray:
        cached = neighbor_cache.get(local)
        if cached is not None:
            return cached
        d = np.sum((x_cont - x_cont[local]) ** 2, axis=1)
        if groups:
            d = d + med_sq * np.sum(cat_codes != cat_codes[local], axis=1)
        d[local] = np.inf  # exclude self
        order = np.argsort(d, kind="stable")  # ties resolve to the lowest index
        nearest = order[:config.k]
        neighbor_cache[local] = nearest
        return nearest

    synth_values = np.zeros((n_synthetic, matrix.n_cols))
    provenance = [] if with_provenance else None
    for s in range(n_synthetic):
        parent = int(rng.integers(0, minority_rows.size))
        nearest = neighbors_of(parent)
        pick = int(rng.integers(0, config.k))
        neighbor = int(nearest[pick])
        delta = float(rng.uniform())
        row = np.zeros(matrix.n_cols)
        if cont.size:
            row[cont] = x_cont[parent] + delta * (x_cont[neighbor] - x_cont[parent])
        mode_counts: dict[str, dict[str, int]] = {}
        for g, (source, idxs, cats) in enumerate(groups):
            codes = cat_codes[nearest, g]
            tally = np.bincount(codes, minlength=len(idxs))
            mode = int(np.argmax(tally))  # argmax takes the lowest index on ties
            row[idxs[mode]] = 1.0
            mode_counts[source] = {cats[i]: int(tally[i]) for i in range(len(idxs))
                                   if tally[i] > 0}
        synth_values[s] = row
        if provenance is not None:
            provenance.append(SyntheticProvenance(
                parent=int(minority_rows[parent]),
                neighbor=int(minority_rows[neighbor]),
                delta=delta,
                neighbor_indices=tuple(int(minority_rows[i]) for i in nearest),
                mode_counts=mode_counts))

    values = np.vstack([matrix.values, synth_values])
    labels = np.concatenate([matrix.labels, np.full(n_synthetic, minority, dtype=int)])
    row_ids = np.concatenate([matrix.row_ids, np.full(n_synthetic, -1, dtype=int)])
    out = FeatureMatrix(values=values, columns=matrix.columns, labels=labels,
                        standardized=True, row_ids=row_ids)
    return SmoteResult(matrix=out, n_synthetic=n_synthetic,
                       provenance=tuple(provenance) if provenance is not None else None)


def provenance_lines(result: SmoteResult) -> list[str]:
    """Debug log: one line per synthetic row."""
    if result.provenance is None:
        return []
    lines = []
    for p in result.provenance:
        modes = "; ".join(
            f"{feat}:" + ",".join(f"{cat}={cnt}" for cat, cnt in counts.items())
            for feat, counts in p.mode_counts.items())
        lines.append(f"parent={p.parent} neighbor={p.neighbor} delta={p.delta:.6f} {modes}")
    return lines
