"""Global feature-importance rankings and cross-model comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..models.forest import ForestModel, forest_gini_decreases
from ..models.logistic import LogisticModel
from ..models.tree import TreeModel, gini_decreases
from ..preprocess import ColumnMeta
from .shapley import (
    EXACT_FEATURE_GUARD,
    sampled_phi_batch,
    shapley_exact,
    tree_shapley_batch,
)


@dataclass(frozen=True)
class RankingEntry:
    name: str
    source: str
    value: float
    std: float | None = None


@dataclass(frozen=True)
class ImportanceRanking:
    """(feature, importance) pairs sorted by absolute importance."""

    entries: tuple[RankingEntry, ...]
    method: str  # "lr_coef" | "gini" | "shap"
    normalized: bool = False

    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def top(self, n: int) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries[:n])

    def value(self, name: str) -> float:
        for e in self.entries:
            if e.name == name:
                return e.value
        raise KeyError(name)


def _rank(entries: list[RankingEntry]) -> tuple[RankingEntry, ...]:
    # Stable sort keeps column order among exact ties.
    return tuple(sorted(entries, key=lambda e: -abs(e.value)))


def lr_coefficients(model: LogisticModel,
                    columns: tuple[ColumnMeta, ...]) -> ImportanceRanking:
    """Signed coefficients per encoded column, ranked by magnitude."""
    entries = [RankingEntry(col.name, col.source, float(w))
               for col, w in zip(columns, model.weights)]
    return ImportanceRanking(entries=_rank(entries), method="lr_coef")


def gini_importance(model: TreeModel | ForestModel,
                    columns: tuple[ColumnMeta, ...],
                    aggregate: bool = False) -> ImportanceRanking:
    """Node-probability-weighted impurity decreases, normalized to sum 1.

    A tree with no splits has nothing to normalize; its zeros are reported
    with normalized=False.
    """
    raw = forest_gini_decreases(model) if isinstance(model, ForestModel) \
        else gini_decreases(model)
    if aggregate:
        names: list[str] = []
        totals: dict[str, float] = {}
        for col, v in zip(columns, raw):
            if col.source not in totals:
                names.append(col.source)
                totals[col.source] = 0.0
            totals[col.source] += float(v)
        pairs = [(name, name, totals[name]) for name in names]
    else:
        pairs = [(col.name, col.source, float(v)) for col, v in zip(columns, raw)]
    total = sum(v for _, _, v in pairs)
    normalized = total > 0.0
    if normalized:
        pairs = [(n, s, v / total) for n, s, v in pairs]
    entries = [RankingEntry(n, s, v) for n, s, v in pairs]
    return ImportanceRanking(entries=_rank(entries), method="gini",
                             normalized=normalized)


@dataclass(frozen=True)
class L1SurvivalReport:
    """Features whose coefficient stayed nonzero in a strict majority of trials."""

    survivors: tuple[RankingEntry, ...]  # mean coefficient with std across trials
    annihilated: tuple[str, ...]
    n_trials: int


def l1_selected_features(coefficient_sets: list[np.ndarray],
                         columns: tuple[ColumnMeta, ...],
                         zero_tol: float = 1e-12) -> L1SurvivalReport:
    if len(coefficient_sets) < 1:
        raise ConfigError("need at least one coefficient set")
    coefs = np.vstack(coefficient_sets)
    if coefs.shape[1] != len(columns):
        raise ConfigError("coefficient length does not match columns")
    nonzero_counts = (np.abs(coefs) > zero_tol).sum(axis=0)
    survives = nonzero_counts * 2 > coefs.shape[0]  # strictly more than half
    survivors = [RankingEntry(col.name, col.source, float(coefs[:, i].mean()),
                              std=float(coefs[:, i].std()))
                 for i, col in enumerate(columns) if survives[i]]
    annihilated = tuple(col.name for i, col in enumerate(columns) if not survives[i])
    return L1SurvivalReport(survivors=_rank(survivors), annihilated=annihilated,
                            n_trials=coefs.shape[0])


def shap_importance(model, sample_rows: np.ndarray, background,
                    columns: tuple[ColumnMeta, ...],
                    mode: str = "auto", repeats: int = 30,
                    n_permutations: int = 200, seed: int = 0) -> ImportanceRanking:
    """Mean absolute Shapley value per column across the sample rows.

    Tree and forest models use the exact path-dependent game. Other models
    use exact enumeration when the column count allows it, otherwise the
    permutation estimator repeated `repeats` times, reported as mean with a
    per-feature std.
    """
    sample_rows = np.atleast_2d(np.asarray(sample_rows, dtype=float))
    if sample_rows.shape[0] == 0:
        raise ConfigError("sample rows must be non-empty")
    p = sample_rows.shape[1]
    is_tree = isinstance(model, (TreeModel, ForestModel))
    if mode not in ("auto", "exact", "sampled", "tree"):
        raise ConfigError(f"unknown mode {mode!r}")

    if is_tree and mode in ("auto", "exact", "tree"):
        _, phi = tree_shapley_batch(model, sample_rows)
        importances = np.abs(phi).mean(axis=0)
        stds = None
    elif mode == "exact" or (mode == "auto" and p <= EXACT_FEATURE_GUARD):
        predict = model.predict_proba_matrix
        phis = np.vstack([shapley_exact(predict, row, background).phi
                          for row in sample_rows])
        importances = np.abs(phis).mean(axis=0)
        stds = None
    else:
        predict = model.predict_proba_matrix
        per_repeat = np.zeros((repeats, p))
        for r in range(repeats):
            phi = sampled_phi_batch(predict, sample_rows, background,
                                    n_permutations=n_permutations, seed=seed + r)
            per_repeat[r] = np.abs(phi).mean(axis=0)
        importances = per_repeat.mean(axis=0)
        stds = per_repeat.std(axis=0)

    entries = [RankingEntry(col.name, col.source, float(importances[i]),
                            std=None if stds is None else float(stds[i]))
               for i, col in enumerate(columns)]
    return ImportanceRanking(entries=_rank(entries), method="shap")


@dataclass(frozen=True)
class TopFeatureComparison:
    methods: tuple[str, ...]
    top: dict  # method -> tuple of source-feature names
    intersection: tuple[str, ...]
    n: int


def aggregate_to_sources(ranking: ImportanceRanking) -> ImportanceRanking:
    """Collapse indicator columns into their source feature (sum of |value|)."""
    names: list[str] = []
    totals: dict[str, float] = {}
    for e in ranking.entries:
        if e.source not in totals:
            names.append(e.source)
            totals[e.source] = 0.0
        totals[e.source] += abs(e.value)
    entries = [RankingEntry(n, n, totals[n]) for n in names]
    return ImportanceRanking(entries=_rank(entries), method=ranking.method,
                             normalized=ranking.normalized)


def compare_top_features(rankings: list[ImportanceRanking], n: int = 5,
                         aggregate: bool = True) -> TopFeatureComparison:
    """Per-ranking top-n lists plus the features common to all of them."""
    if len(rankings) < 2:
        raise ConfigError("need at least two rankings to compare")
    methods = []
    top: dict = {}
    for ranking in rankings:
        collapsed = aggregate_to_sources(ranking) if aggregate else ranking
        method = ranking.method
        key = method
        suffix = 2
        while key in top:  # same method twice stays distinguishable
            key = f"{method}#{suffix}"
            suffix += 1
        methods.append(key)
        top[key] = collapsed.top(n)
    common = [name for name in top[methods[0]]
              if all(name in top[m] for m in methods[1:])]
    return TopFeatureComparison(methods=tuple(methods), top=top,
                                intersection=tuple(common), n=n)
