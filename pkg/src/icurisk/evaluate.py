"""Metrics, cross-validation, hyperparameter search, and repeated trials.

The benchmarking protocol: stratified 75/25 split, minority oversampling on
the training partition only, per-family training, and AUC/ACC/REC on the
held-out partition, repeated across seeded trials and reported as
mean +- standard deviation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, UndefinedMetricError
from .models import (
    ForestConfig,
    KnnConfig,
    LogisticConfig,
    MlpConfig,
    TreeConfig,
    forest_gini_decreases,
    train_forest,
    train_knn,
    train_logistic,
    train_mlp,
    train_tree,
)
from .preprocess import FeatureMatrix, apply_standardizer, fit_standardizer, train_test_split
from .resample import SmoteConfig, smote_nc

FAMILIES = ("logistic", "tree", "forest", "knn", "mlp")
METRIC_NAMES = ("auc", "acc", "rec")


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class Metrics:
    auc: float
    acc: float
    rec: float

    def get(self, name: str) -> float:
        return getattr(self, name)


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative, ties half.

    Computed from midranks in O(n log n); equal to the pairwise concordance
    fraction.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC requires both classes")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    n = scores.size
    # Midranks: tied values share the average of their 1-based ranks.
    boundaries = np.flatnonzero(sorted_scores[:-1] != sorted_scores[1:]) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [n]])
    group_mid = (starts + ends - 1) / 2.0 + 1.0
    midranks = np.empty(n)
    midranks[order] = np.repeat(group_mid, ends - starts)
    rank_sum = float(midranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.size == 0:
        raise UndefinedMetricError("accuracy of an empty set is undefined")
    return float(np.mean((scores >= threshold).astype(int) == labels))


def recall(scores, labels, threshold: float = 0.5) -> float:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = labels == 1
    if not pos.any():
        raise UndefinedMetricError("recall requires at least one positive")
    return float(np.mean(scores[pos] >= threshold))


def compute_metrics(scores, labels, threshold: float = 0.5) -> Metrics:
    return Metrics(auc=auc(scores, labels),
                   acc=accuracy(scores, labels, threshold),
                   rec=recall(scores, labels, threshold))


# ---------------------------------------------------------------------------
# Family construction


def make_family_config(family: str, params: dict | None = None, seed: int = 0):
    """Build a family config from a plain parameter dict plus a seed."""
    params = dict(params or {})
    if family == "logistic":
        return LogisticConfig(seed=seed, **params)
    if family == "tree":
        return TreeConfig(**params)
    if family == "forest":
        return ForestConfig(seed=seed, **params)
    if family == "knn":
        k = params.pop("k", 16)
        if params:
            raise ConfigError(f"unknown knn parameters {sorted(params)}")
        return KnnConfig(k=k)
    if family == "mlp":
        if "hidden" in params:
            params["hidden"] = tuple(params["hidden"])
        return MlpConfig(seed=seed, **params)
    raise ConfigError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


def train_family(family: str, matrix: FeatureMatrix, config=None, seed: int = 0,
                 knn_weight_trees: int = 50):
    """Train one family on a standardized matrix.

    knn uses a forest's Gini importances as distance weights; when the
    weights are not supplied, a weighting forest is trained internally.
    """
    x, y = matrix.values, matrix.labels
    if family == "logistic":
        return train_logistic(x, y, config or LogisticConfig(seed=seed))
    if family == "tree":
        return train_tree(x, y, config or TreeConfig())
    if family == "forest":
        return train_forest(x, y, config or ForestConfig(seed=seed))
    if family == "knn":
        config = config or KnnConfig()
        if config.weights is None:
            forest = train_forest(x, y, ForestConfig(n_trees=knn_weight_trees, seed=seed))
            weights = forest_gini_decreases(forest)
            if not (weights > 0).any():
                weights = np.ones(x.shape[1])
            config = replace(config, weights=weights)
        return train_knn(x, y, config)
    if family == "mlp":
        return train_mlp(x, y, config or MlpConfig(seed=seed))
    raise ConfigError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True)
class CvDebug:
    """Per-fold training row ids and the SMOTE parent/neighbor ids they used."""

    fold_train_ids: tuple[np.ndarray, ...]
    fold_smote_parent_ids: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class CvResult:
    folds: tuple[Metrics, ...]
    mean: Metrics
    std: Metrics
    k: int
    seed: int
    debug: CvDebug | None = None


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Shuffled class-balanced fold assignment; per-fold positives differ <= 1."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        for i, row in enumerate(members):
            folds[i % k].append(int(row))
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def _aggregate(metrics_list) -> tuple[Metrics, Metrics]:
    arr = {name: np.array([m.get(name) for m in metrics_list]) for name in METRIC_NAMES}
    mean = Metrics(**{name: float(v.mean()) for name, v in arr.items()})
    std = Metrics(**{name: float(v.std()) for name, v in arr.items()})
    return mean, std


def kfold_cv(family: str, config, matrix: FeatureMatrix, k: int = 5, seed: int = 0,
             resample: SmoteConfig | None = None, debug: bool = False,
             threshold: float = 0.5) -> CvResult:
    """Stratified k-fold CV; oversampling happens inside each training fold."""
    if k < 2:
        raise ConfigError("k must be >= 2")
    if k > matrix.n_rows:
        raise ConfigError("k exceeds the number of rows")
    folds = stratified_folds(matrix.labels, k, seed)
    for f, fold in enumerate(folds):
        if len(np.unique(matrix.labels[fold])) < 2:
            raise ConfigError(f"fold {f} lacks one of the classes; lower k")
    fold_metrics = []
    debug_train_ids = []
    debug_parent_ids = []
    for f in range(k):
        test_rows = folds[f]
        train_rows = np.sort(np.concatenate([folds[g] for g in range(k) if g != f]))
        train = matrix.take(train_rows)
        test = matrix.take(test_rows)
        if resample is not None:
            result = smote_nc(train, replace(resample, seed=resample.seed + f),
                              with_provenance=debug)
            if debug:
                parents = np.array([train.row_ids[p.parent] for p in result.provenance],
                                   dtype=int)
                debug_parent_ids.append(parents)
            train = result.matrix
        elif debug:
            debug_parent_ids.append(np.array([], dtype=int))
        if debug:
            debug_train_ids.append(matrix.row_ids[train_rows])
        model = train_family(family, train, config, seed=seed + f)
        scores = model.predict_proba_matrix(test.values)
        fold_metrics.append(compute_metrics(scores, test.labels, threshold))
    mean, std = _aggregate(fold_metrics)
    dbg = CvDebug(fold_train_ids=tuple(debug_train_ids),
                  fold_smote_parent_ids=tuple(debug_parent_ids)) if debug else None
    return CvResult(folds=tuple(fold_metrics), mean=mean, std=std, k=k, seed=seed,
                    debug=dbg)


# ---------------------------------------------------------------------------
# Hyperparameter search


@dataclass(frozen=True)
class SearchResult:
    best_params: dict
    best_cv: CvResult
    evaluations: tuple[tuple[dict, float], ...]  # (params, mean AUC) per candidate


def grid_search(family: str, space: dict[str, list], matrix: FeatureMatrix,
                k: int = 5, seed: int = 0, resample: SmoteConfig | None = None,
                base_params: dict | None = None) -> SearchResult:
    """Evaluate every grid point by CV; best mean AUC wins, first on ties."""
    if not space or any(len(v) == 0 for v in space.values()):
        raise ConfigError("search space must be non-empty")
    names = list(space.keys())
    candidates = [dict(zip(names, combo))
                  for combo in itertools.product(*(space[n] for n in names))]
    return _evaluate_candidates(family, candidates, matrix, k, seed, resample,
                                base_params)


def random_search(family: str, space: dict, budget: int, matrix: FeatureMatrix,
                  k: int = 5, seed: int = 0, resample: SmoteConfig | None = None,
                  base_params: dict | None = None) -> SearchResult:
    """Sample `budget` configurations: lists are choices, (lo, hi) are ranges."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    if not space:
        raise ConfigError("search space must be non-empty")
    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(budget):
        params = {}
        for name, spec in space.items():
            if isinstance(spec, tuple) and len(spec) == 2:
                lo, hi = spec
                if isinstance(lo, int) and isinstance(hi, int):
                    params[name] = int(rng.integers(lo, hi + 1))
                else:
                    params[name] = float(rng.uniform(lo, hi))
            elif isinstance(spec, list) and spec:
                params[name] = spec[int(rng.integers(0, len(spec)))]
            else:
                raise ConfigError(f"invalid random-search spec for {name!r}")
        candidates.append(params)
    return _evaluate_candidates(family, candidates, matrix, k, seed, resample,
                                base_params)


def _evaluate_candidates(family, candidates, matrix, k, seed, resample,
                         base_params) -> SearchResult:
    best = None
    evaluations = []
    for params in candidates:
        merged = dict(base_params or {})
        merged.update(params)
        config = make_family_config(family, merged, seed=seed)
        cv = kfold_cv(family, config, matrix, k=k, seed=seed, resample=resample)
        evaluations.append((params, cv.mean.auc))
        if best is None or cv.mean.auc > best[1]:
            best = (params, cv.mean.auc, cv)
    return SearchResult(best_params=best[0], best_cv=best[2],
                        evaluations=tuple(evaluations))


def tune_l1_lambda(matrix: FeatureMatrix, grid: list[float], k: int = 5,
                   seed: int = 0, resample: SmoteConfig | None = None,
                   rule: str = "1se", base_params: dict | None = None) -> float:
    """Pick an L1 penalty by CV AUC.

    rule="max" takes the argmax; rule="1se" takes the largest penalty whose
    mean AUC is within one standard error of the best, which favors sparser
    models when the AUC curve is flat.
    """
    results = []
    for lam in grid:
        params = dict(base_params or {})
        params["l1_lambda"] = lam
        config = make_family_config("logistic", params, seed=seed)
        cv = kfold_cv("logistic", config, matrix, k=k, seed=seed, resample=resample)
        se = cv.std.auc / np.sqrt(cv.k)
        results.append((lam, cv.mean.auc, se))
    best_lam, best_auc, best_se = max(results, key=lambda r: r[1])
    if rule == "max":
        return best_lam
    if rule != "1se":
        raise ConfigError(f"unknown rule {rule!r}")
    threshold = best_auc - best_se
    eligible = [lam for lam, mean_auc, _ in results if mean_auc >= threshold]
    return max(eligible)


# ---------------------------------------------------------------------------
# Repeated trials


@dataclass(frozen=True)
class TrialRunConfig:
    families: tuple[str, ...] = FAMILIES
    n_trials: int = 30
    base_seed: int = 0
    test_fraction: float = 0.25
    smote: SmoteConfig | None = field(default_factory=SmoteConfig)
    family_params: dict = field(default_factory=dict)
    search_spaces: dict | None = None
    search_k: int = 5
    threshold: float = 0.5

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        for family in self.families:
            if family not in FAMILIES:
                raise ConfigError(
                    f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


@dataclass(frozen=True)
class TrialReport:
    """Mean +- sigma of each metric per family over the repeated trials."""

    families: tuple[str, ...]
    n_trials: int
    base_seed: int
    values: dict  # family -> metric -> np.ndarray of per-trial values
    tuned_params: dict

    def mean(self, family: str, metric: str) -> float:
        return float(self.values[family][metric].mean())

    def std(self, family: str, metric: str) -> float:
        return float(self.values[family][metric].std())

    def csv_rows(self) -> list[tuple[str, str, float, float]]:
        return [(family, metric, self.mean(family, metric), self.std(family, metric))
                for family in self.families for metric in METRIC_NAMES]

    def to_csv(self) -> str:
        lines = ["family,metric,mean,std"]
        for family, metric, mean, std in self.csv_rows():
            lines.append(f"{family},{metric},{mean!r},{std!r}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = 12
        header = "metric".ljust(8) + "".join(f.rjust(width + 8) for f in self.families)
        lines = [f"performance over {self.n_trials} trials (mean +- std)", header]
        for metric in METRIC_NAMES:
            cells = [f"{self.mean(f, metric):.3f} +- {self.std(f, metric):.3f}"
                     for f in self.families]
            lines.append(metric.upper().ljust(8) + "".join(c.rjust(width + 8)
                                                           for c in cells))
        return "\n".join(lines) + "\n"


def _prepare_trial(matrix: FeatureMatrix, test_fraction: float, seed: int,
                   smote: SmoteConfig | None):
    train, test = train_test_split(matrix, test_fraction, stratified=True, seed=seed)
    state = fit_standardizer(train)
    train_s = apply_standardizer(state, train)
    test_s = apply_standardizer(state, test)
    if smote is not None:
        train_s = smote_nc(train_s, replace(smote, seed=seed)).matrix
    return train_s, test_s


def run_trials(matrix: FeatureMatrix, config: TrialRunConfig) -> TrialReport:
    """Run the repeated benchmarking protocol on an unstandardized matrix.

    Trial i derives every seed from base_seed + i. When search spaces are
    given, hyperparameters are tuned once by CV on trial 0's training
    partition, then frozen for every trial.
    """
    if matrix.standardized:
        raise ConfigError("run_trials standardizes internally; pass raw encoding")
    tuned_params: dict = {f: dict(config.family_params.get(f, {}))
                          for f in config.families}
    if config.search_spaces:
        tune_train, _ = train_test_split(matrix, config.test_fraction,
                                         stratified=True, seed=config.base_seed)
        state = fit_standardizer(tune_train)
        tune_std = apply_standardizer(state, tune_train)
        for family, space in config.search_spaces.items():
            if family not in config.families:
                continue
            result = grid_search(family, space, tune_std, k=config.search_k,
                                 seed=config.base_seed, resample=config.smote,
                                 base_params=tuned_params.get(family))
            tuned_params[family].update(result.best_params)

    values = {family: {metric: np.zeros(config.n_trials) for metric in METRIC_NAMES}
              for family in config.families}
    for i in range(config.n_trials):
        seed = config.base_seed + i
        train_s, test_s = _prepare_trial(matrix, config.test_fraction, seed,
                                         config.smote)
        for family in config.families:
            family_config = make_family_config(family, tuned_params[family], seed=seed)
            model = train_family(family, train_s, family_config, seed=seed)
            scores = model.predict_proba_matrix(test_s.values)
            metrics = compute_metrics(scores, test_s.labels, config.threshold)
            for metric in METRIC_NAMES:
                values[family][metric][i] = metrics.get(metric)
    return TrialReport(families=tuple(config.families), n_trials=config.n_trials,
                       base_seed=config.base_seed, values=values,
                       tuned_params=tuned_params)


def run_l1_coefficient_trials(matrix: FeatureMatrix, l1_lambda: float,
                              n_trials: int = 30, base_seed: int = 0,
                              test_fraction: float = 0.25,
                              smote: SmoteConfig | None = None,
                              epochs: int = 400) -> list[np.ndarray]:
    """Per-trial L1 logistic feature weights for survival analysis."""
    smote = smote if smote is not None else SmoteConfig()
    coefficient_sets = []
    for i in range(n_trials):
        seed = base_seed + i
        train_s, _ = _prepare_trial(matrix, test_fraction, seed, smote)
        model = train_logistic(train_s.values, train_s.labels,
                               LogisticConfig(l1_lambda=l1_lambda, epochs=epochs,
                                              seed=seed))
        coefficient_sets.append(model.weights.copy())
    return coefficient_sets
