"""Cohort cleaning and matrix preparation.

Pipeline order (see `clean_cohort`): drop records with missing values in
non-imputable features, fit the BMI-on-weight regression, impute missing
heights, then apply the 3-sigma outlier filter. Encoding one-hot-expands
categorical features; standardization is always fitted on training rows only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cohort import CONTINUOUS, CohortTable, FeatureSchema
from .errors import (
    ColumnMismatchError,
    ConfigError,
    DegenerateFitError,
    DomainError,
    MissingValueError,
)

# Features whose missing values are handled by imputation instead of a drop.
# bmi is derived from height and weight, so it inherits their exemption.
MISSING_EXEMPT = frozenset({"height", "weight", "bmi"})

OUTLIER_SIGMAS = 3.0


# ---------------------------------------------------------------------------
# Outlier and missing-value filtering


@dataclass(frozen=True)
class OutlierReport:
    """Drop accounting for one filtering pass."""

    input_count: int
    missing_drops: dict[str, int]
    outlier_drops: dict[str, int]
    retained: int

    @property
    def total_dropped(self) -> int:
        return sum(self.missing_drops.values()) + sum(self.outlier_drops.values())


def _feature_stats(table: CohortTable) -> dict[str, tuple[float, float]]:
    """Mean and population sigma per continuous feature over non-missing values."""
    stats = {}
    for name in table.schema.continuous_names:
        values = np.array([r.values[name] for r in table.records
                           if r.values[name] is not None], dtype=float)
        if values.size == 0:
            stats[name] = (math.nan, math.nan)
        else:
            stats[name] = (float(values.mean()), float(values.std()))
    return stats


def remove_outliers(table: CohortTable) -> tuple[CohortTable, OutlierReport]:
    """Drop records with missing non-imputable features or 3-sigma outliers.

    Band statistics are computed once on the input table. A record dropped
    for several reasons is counted once, under the first triggering rule
    (missing before outlier, features in schema order).
    """
    stats = _feature_stats(table)
    missing_drops: dict[str, int] = {}
    outlier_drops: dict[str, int] = {}
    kept = []
    for record in table.records:
        reason = None
        for spec in table.schema.features:
            if spec.name not in MISSING_EXEMPT and record.values[spec.name] is None:
                reason = ("missing", spec.name)
                break
        if reason is None:
            for name in table.schema.continuous_names:
                value = record.values[name]
                if value is None:
                    continue
                mean, sd = stats[name]
                if abs(value - mean) > OUTLIER_SIGMAS * sd:
                    reason = ("outlier", name)
                    break
        if reason is None:
            kept.append(record)
        elif reason[0] == "missing":
            missing_drops[reason[1]] = missing_drops.get(reason[1], 0) + 1
        else:
            outlier_drops[reason[1]] = outlier_drops.get(reason[1], 0) + 1
    report = OutlierReport(input_count=len(table), missing_drops=missing_drops,
                           outlier_drops=outlier_drops, retained=len(kept))
    return table.replace_records(kept), report


# ---------------------------------------------------------------------------
# BMI regression and height imputation


@dataclass(frozen=True)
class BmiRegression:
    """OLS fit of BMI against weight, used to impute missing heights."""

    intercept: float
    slope: float
    r_squared: float
    n_pairs: int | None = None

    def predict(self, weight: float) -> float:
        return self.intercept + self.slope * weight


# Reference coefficients published for the full restricted cohort; selected
# with the --paper-coefficients CLI flag. The pair count is unknown.
PUBLISHED_BMI_REGRESSION = BmiRegression(intercept=5.6925, slope=0.2769,
                                         r_squared=0.737, n_pairs=None)


def fit_bmi_regression(table: CohortTable) -> BmiRegression:
    """Least-squares BMI = intercept + slope * weight over complete pairs."""
    pairs = [(r.values["weight"], r.values["bmi"]) for r in table.records
             if r.values["weight"] is not None and r.values["bmi"] is not None]
    if len(pairs) < 2:
        raise DegenerateFitError(f"need >= 2 (weight, bmi) pairs, found {len(pairs)}")
    w = np.array([p[0] for p in pairs], dtype=float)
    b = np.array([p[1] for p in pairs], dtype=float)
    var_w = float(np.var(w))
    if var_w == 0.0:
        raise DegenerateFitError("weight has zero variance; slope is undefined")
    slope = float(np.cov(w, b, bias=True)[0, 1] / var_w)
    intercept = float(b.mean() - slope * w.mean())
    residuals = b - (intercept + slope * w)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((b - b.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return BmiRegression(intercept=intercept, slope=slope,
                         r_squared=r_squared, n_pairs=len(pairs))


@dataclass(frozen=True)
class ImputationReport:
    imputed_heights: int
    completed_bmi: int
    dropped_missing_weight: int
    dropped_nonpositive_bmi: int


def impute_heights(table: CohortTable,
                   model: BmiRegression) -> tuple[CohortTable, ImputationReport]:
    """Fill missing heights from the BMI regression; drop weightless records.

    height = sqrt(weight / predicted_bmi), so BMI = weight / height^2 holds
    exactly for every imputed record. Records whose predicted BMI is
    non-positive are dropped and counted.
    """
    kept = []
    imputed = completed = no_weight = bad_bmi = 0
    for record in table.records:
        weight = record.values["weight"]
        height = record.values["height"]
        if weight is None:
            no_weight += 1
            continue
        if height is None:
            bmi = model.predict(weight)
            if bmi <= 0.0:
                bad_bmi += 1
                continue
            kept.append(record.with_values(bmi=bmi, height=math.sqrt(weight / bmi)))
            imputed += 1
        elif record.values["bmi"] is None:
            kept.append(record.with_values(bmi=weight / height ** 2))
            completed += 1
        else:
            kept.append(record)
    report = ImputationReport(imputed_heights=imputed, completed_bmi=completed,
                              dropped_missing_weight=no_weight,
                              dropped_nonpositive_bmi=bad_bmi)
    return table.replace_records(kept), report


@dataclass(frozen=True)
class CleanReport:
    """Aggregated accounting for the full cleaning pipeline."""

    input_count: int
    missing_drops: dict[str, int]
    outlier_drops: dict[str, int]
    dropped_nonpositive_bmi: int
    imputed_heights: int
    retained: int
    regression: BmiRegression

    def lines(self) -> list[str]:
        out = [f"records in: {self.input_count}", f"records retained: {self.retained}"]
        for name, count in sorted(self.missing_drops.items()):
            out.append(f"dropped, missing {name}: {count}")
        for name, count in sorted(self.outlier_drops.items()):
            out.append(f"dropped, {name} outlier: {count}")
        if self.dropped_nonpositive_bmi:
            out.append(f"dropped, non-positive imputed bmi: {self.dropped_nonpositive_bmi}")
        out.append(f"heights imputed: {self.imputed_heights}")
        out.append("bmi regression: intercept %.4f slope %.4f r2 %.3f"
                   % (self.regression.intercept, self.regression.slope,
                      self.regression.r_squared))
        return out


def clean_cohort(table: CohortTable,
                 regression: BmiRegression | None = None) -> tuple[CohortTable, CleanReport]:
    """Run drop-missing, height imputation, then the 3-sigma filter.

    Pass `regression` (e.g. the published coefficients) to skip fitting on
    the input cohort.
    """
    missing_drops: dict[str, int] = {}
    stage1 = []
    for record in table.records:
        dropped = False
        for spec in table.schema.features:
            if spec.name not in MISSING_EXEMPT and record.values[spec.name] is None:
                missing_drops[spec.name] = missing_drops.get(spec.name, 0) + 1
                dropped = True
                break
        if not dropped:
            stage1.append(record)
    staged = table.replace_records(stage1)

    fitted = regression if regression is not None else fit_bmi_regression(staged)
    imputed_table, imp = impute_heights(staged, fitted)
    if imp.dropped_missing_weight:
        missing_drops["weight"] = missing_drops.get("weight", 0) + imp.dropped_missing_weight

    filtered, outlier_report = remove_outliers(imputed_table)
    for name, count in outlier_report.missing_drops.items():
        missing_drops[name] = missing_drops.get(name, 0) + count
    report = CleanReport(input_count=len(table), missing_drops=missing_drops,
                         outlier_drops=outlier_report.outlier_drops,
                         dropped_nonpositive_bmi=imp.dropped_nonpositive_bmi,
                         imputed_heights=imp.imputed_heights,
                         retained=len(filtered), regression=fitted)
    return filtered, report


# ---------------------------------------------------------------------------
# Renal function


def compute_egfr(creatinine: float, age: float, sex: str, black: bool = False) -> float:
    """Estimated GFR (mL/min/1.73m^2) from serum creatinine, 2009 CKD-EPI.

    kappa and alpha depend on sex; the 1.159 race coefficient is applied
    only when `black` is explicitly set.
    """
    if creatinine <= 0:
        raise DomainError(f"creatinine must be > 0, got {creatinine}")
    if age <= 0:
        raise DomainError(f"age must be > 0, got {age}")
    if sex not in ("M", "F"):
        raise DomainError(f"sex must be 'M' or 'F', got {sex!r}")
    kappa = 0.7 if sex == "F" else 0.9
    alpha = -0.329 if sex == "F" else -0.411
    ratio = creatinine / kappa
    value = 141.0 * min(ratio, 1.0) ** alpha * max(ratio, 1.0) ** -1.209 * 0.993 ** age
    if sex == "F":
        value *= 1.018
    if black:
        value *= 1.159
    return value


# ---------------------------------------------------------------------------
# Encoding


@dataclass(frozen=True)
class ColumnMeta:
    """Provenance of one matrix column."""

    name: str
    source: str
    kind: str  # "continuous" | "indicator"
    category: str | None = None


@dataclass(eq=False)
class FeatureMatrix:
    """Row-major design matrix with per-column provenance and labels.

    `row_ids` track the original record positions through splits and
    resampling (synthetic rows get -1); treat instances as immutable.
    """

    values: np.ndarray
    columns: tuple[ColumnMeta, ...]
    labels: np.ndarray
    standardized: bool = False
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ColumnMismatchError("matrix shape does not match column metadata")
        if self.labels.shape[0] != self.values.shape[0]:
            raise ColumnMismatchError("labels length does not match row count")
        if self.row_ids is None:
            self.row_ids = np.arange(self.values.shape[0], dtype=int)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def continuous_indices(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.columns) if c.kind == "continuous"],
                        dtype=int)

    def indicator_groups(self) -> list[tuple[str, list[int], list[str]]]:
        """(source feature, column indices, categories) per categorical block."""
        groups: dict[str, tuple[list[int], list[str]]] = {}
        for i, col in enumerate(self.columns):
            if col.kind == "indicator":
                idxs, cats = groups.setdefault(col.source, ([], []))
                idxs.append(i)
                cats.append(col.category)
        return [(source, idxs, cats) for source, (idxs, cats) in groups.items()]

    def take(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(values=self.values[rows], columns=self.columns,
                             labels=self.labels[rows], standardized=self.standardized,
                             row_ids=self.row_ids[rows])


def encode(table: CohortTable) -> FeatureMatrix:
    """One-hot-expand categorical features into a numeric design matrix."""
    columns: list[ColumnMeta] = []
    for spec in table.schema.features:
        if spec.kind == CONTINUOUS:
            columns.append(ColumnMeta(spec.name, spec.name, "continuous"))
        else:
            for category in spec.categories:
                columns.append(ColumnMeta(f"{spec.name}={category}", spec.name,
                                          "indicator", category))
    values = np.zeros((len(table), len(columns)))
    labels = np.zeros(len(table), dtype=int)
    for r, record in enumerate(table.records):
        c = 0
        for spec in table.schema.features:
            cell = record.values[spec.name]
            if cell is None:
                raise MissingValueError(
                    f"record {r} is missing {spec.name!r}; encode requires complete data")
            if spec.kind == CONTINUOUS:
                values[r, c] = cell
                c += 1
            else:
                values[r, c + spec.categories.index(cell)] = 1.0
                c += len(spec.categories)
        labels[r] = record.label
    return FeatureMatrix(values=values, columns=tuple(columns), labels=labels)


def encode_row(schema: FeatureSchema, columns: tuple[ColumnMeta, ...],
               features: dict) -> np.ndarray:
    """Encode one raw feature mapping into the given column layout."""
    row = np.zeros(len(columns))
    for i, col in enumerate(columns):
        if col.source not in features:
            raise MissingValueError(f"feature {col.source!r} is required")
        value = features[col.source]
        if col.kind == "continuous":
            if value is None or isinstance(value, str):
                raise MissingValueError(f"feature {col.source!r} must be numeric")
            row[i] = float(value)
        else:
            spec = schema.spec(col.source)
            if value not in spec.categories:
                raise MissingValueError(
                    f"feature {col.source!r} has unknown category {value!r}")
            row[i] = 1.0 if value == col.category else 0.0
    return row


# ---------------------------------------------------------------------------
# Standardization


@dataclass(frozen=True, eq=False)
class StandardizerState:
    """Per-column location/scale fitted on training rows.

    Indicator columns and zero-variance columns get scale 1 so they pass
    through unchanged (the latter are listed in `zero_variance`).
    """

    column_names: tuple[str, ...]
    means: np.ndarray
    scales: np.ndarray
    zero_variance: tuple[str, ...]


def fit_standardizer(matrix: FeatureMatrix) -> StandardizerState:
    means = np.zeros(matrix.n_cols)
    scales = np.ones(matrix.n_cols)
    flagged = []
    for i in matrix.continuous_indices():
        column = matrix.values[:, i]
        means[i] = column.mean() if column.size else 0.0
        sd = float(column.std()) if column.size else 0.0
        if sd == 0.0:
            flagged.append(matrix.columns[i].name)
        else:
            scales[i] = sd
    return StandardizerState(column_names=matrix.column_names, means=means,
                             scales=scales, zero_variance=tuple(flagged))


def apply_standardizer(state: StandardizerState, matrix: FeatureMatrix) -> FeatureMatrix:
    """Transform continuous columns to (x - mean) / sigma.

    Refuses an already-standardized matrix: a second application would
    silently rescale, so the pipeline applies it exactly once.
    """
    if matrix.standardized:
        raise ConfigError("matrix is already standardized")
    if state.column_names != matrix.column_names:
        raise ColumnMismatchError("standardizer was fitted on different columns")
    values = (matrix.values - state.means) / state.scales
    return FeatureMatrix(values=values, columns=matrix.columns, labels=matrix.labels,
                         standardized=True, row_ids=matrix.row_ids)


def standardize_row(state: StandardizerState, row: np.ndarray) -> np.ndarray:
    return (row - state.means) / state.scales


def destandardize_row(state: StandardizerState, row: np.ndarray) -> np.ndarray:
    return row * state.scales + state.means


# ---------------------------------------------------------------------------
# Train/test split


def train_test_split(matrix: FeatureMatrix, test_fraction: float = 0.25,
                     stratified: bool = True,
                     seed: int = 0) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Seeded disjoint partition; stratified mode preserves the class ratio."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n = matrix.n_rows
    if stratified:
        test_idx = []
        train_idx = []
        for cls in (0, 1):
            members = np.flatnonzero(matrix.labels == cls)
            if members.size == 0:
                raise ConfigError(f"stratified split needs members of class {cls}")
            members = members[rng.permutation(members.size)]
            n_test = int(math.floor(test_fraction * members.size + 0.5))
            test_idx.append(members[:n_test])
            train_idx.append(members[n_test:])
        test = np.sort(np.concatenate(test_idx))
        train = np.sort(np.concatenate(train_idx))
    else:
        order = rng.permutation(n)
        n_test = int(math.floor(test_fraction * n + 0.5))
        test = np.sort(order[:n_test])
        train = np.sort(order[n_test:])
    return matrix.take(train), matrix.take(test)
