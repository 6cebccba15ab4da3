"""Seeded synthetic cohort generation.

The reference clinical database is access-restricted, so the toolkit ships a
generator calibrated to published population statistics. Continuous features
come from truncated normals, categorical features from configured category
probabilities, and the mortality label from a logistic model over a small set
of signal features whose intercept is bisected until the empirical prevalence
matches the configured one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohort import (
    CATEGORY_PROBS,
    CATEGORICAL,
    CONTINUOUS,
    POPULATION_STATS,
    CohortTable,
    FeatureSchema,
    PatientRecord,
    default_schema,
)
from .errors import CalibrationError, ConfigError

TRUNCATION_SIGMAS = 3.5
PREVALENCE_TOLERANCE = 0.005
MAX_BISECTION_STEPS = 100

# Log-odds weights of the planted mortality signal, applied to standardized
# feature values (indicator value for "feature=CATEGORY" keys). age, bun, and
# the CSRU unit dominate so that every model family should rank them highest.
DEFAULT_SIGNAL: dict[str, float] = {
    "age": 1.4,
    "bun": 1.1,
    "service_unit=CSRU": -2.2,
    "heart_rate": 0.7,
    "hemoglobin": -0.6,
    "bmi": -0.55,
}

# Features whose values are derived rather than drawn.
_DERIVED = ("bmi",)


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything needed to reproduce a synthetic cohort bit-for-bit."""

    n: int
    prevalence: float = 0.076
    continuous: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(POPULATION_STATS))
    categorical: dict[str, dict[str, float]] = field(
        default_factory=lambda: {k: dict(v) for k, v in CATEGORY_PROBS.items()})
    signal: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SIGNAL))
    missing_height_rate: float = 0.08
    missing_weight_rate: float = 0.02
    n_outliers: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 0.0 < self.prevalence < 1.0:
            raise ConfigError("prevalence must be in (0, 1)")
        for name, (_, sd) in self.continuous.items():
            if sd <= 0:
                raise ConfigError(f"standard deviation for {name!r} must be > 0")
        for name, probs in self.categorical.items():
            total = sum(probs.values())
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"category probabilities for {name!r} sum to {total}, not 1")
            if any(p < 0 for p in probs.values()):
                raise ConfigError(f"negative category probability for {name!r}")
        for rate in (self.missing_height_rate, self.missing_weight_rate):
            if not 0.0 <= rate < 1.0:
                raise ConfigError("missing rates must be in [0, 1)")
        if self.n_outliers < 0:
            raise ConfigError("n_outliers must be >= 0")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _truncated_normal(rng: np.random.Generator, mean: float, sd: float, n: int) -> np.ndarray:
    """Normal draws with values outside mean +- 3.5 sd redrawn."""
    lo, hi = mean - TRUNCATION_SIGMAS * sd, mean + TRUNCATION_SIGMAS * sd
    values = rng.normal(mean, sd, size=n)
    for _ in range(100):
        bad = (values < lo) | (values > hi)
        if not bad.any():
            return values
        values[bad] = rng.normal(mean, sd, size=int(bad.sum()))
    return np.clip(values, lo, hi)


def _signal_scores(config: GeneratorConfig, schema: FeatureSchema,
                   continuous: dict[str, np.ndarray],
                   categorical: dict[str, np.ndarray]) -> np.ndarray:
    scores = np.zeros(config.n)
    for key, weight in config.signal.items():
        if "=" in key:
            feature, category = key.split("=", 1)
            if feature not in categorical:
                raise ConfigError(f"signal key {key!r} targets unknown categorical feature")
            spec = schema.spec(feature)
            if category not in spec.categories:
                raise ConfigError(f"signal key {key!r} targets unknown category")
            scores += weight * (categorical[feature] == category)
        else:
            if key not in continuous:
                raise ConfigError(f"signal key {key!r} targets unknown continuous feature")
            mean, sd = config.continuous[key]
            scores += weight * (continuous[key] - mean) / sd
    return scores


def _calibrate_intercept(scores: np.ndarray, uniforms: np.ndarray,
                         target: float) -> tuple[float, np.ndarray]:
    """Bisect the intercept until label prevalence is within 0.5 points."""
    lo, hi = -30.0, 30.0

    def frac(c: float) -> float:
        return float(np.mean(uniforms < _sigmoid(scores + c)))

    if frac(lo) > target + PREVALENCE_TOLERANCE or frac(hi) < target - PREVALENCE_TOLERANCE:
        raise CalibrationError("target prevalence unreachable within intercept bounds")
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        f = frac(mid)
        if abs(f - target) <= PREVALENCE_TOLERANCE:
            labels = (uniforms < _sigmoid(scores + mid)).astype(int)
            return mid, labels
        if f < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(
        f"prevalence calibration did not converge after {MAX_BISECTION_STEPS} bisection steps")


def generate_synthetic_cohort(config: GeneratorConfig,
                              schema: FeatureSchema | None = None) -> CohortTable:
    """Generate n seeded records matching the configured population.

    Draw order is fixed (continuous features in schema order, then
    categorical features in schema order, then missing masks, then label
    uniforms, then outlier injection), so equal configs give bit-identical
    tables.
    """
    schema = schema or default_schema()
    rng = np.random.default_rng(config.seed)

    continuous: dict[str, np.ndarray] = {}
    for spec in schema.features:
        if spec.kind != CONTINUOUS or spec.name in _DERIVED:
            continue
        if spec.name not in config.continuous:
            raise ConfigError(f"no population statistics configured for {spec.name!r}")
        mean, sd = config.continuous[spec.name]
        continuous[spec.name] = _truncated_normal(rng, mean, sd, config.n)

    categorical: dict[str, np.ndarray] = {}
    for spec in schema.features:
        if spec.kind != CATEGORICAL:
            continue
        if spec.name not in config.categorical:
            raise ConfigError(f"no category probabilities configured for {spec.name!r}")
        probs = config.categorical[spec.name]
        cats = list(spec.categories)
        p = np.array([probs.get(c, 0.0) for c in cats])
        categorical[spec.name] = rng.choice(np.array(cats, dtype=object), size=config.n, p=p)

    # Quantize stored values to the CSV precision up front, then derive BMI
    # from the stored height/weight so the identity holds in memory.
    for name in continuous:
        continuous[name] = np.asarray(
            [float("%.6g" % v) for v in continuous[name]])
    height = continuous["height"]
    weight = continuous["weight"]
    bmi = weight / np.square(height)

    missing_height = rng.uniform(size=config.n) < config.missing_height_rate
    missing_weight = rng.uniform(size=config.n) < config.missing_weight_rate

    scores = _signal_scores(config, schema, {**continuous, "bmi": bmi}, categorical)
    uniforms = rng.uniform(size=config.n)
    _, labels = _calibrate_intercept(scores, uniforms, config.prevalence)

    outlier_cells: dict[tuple[int, str], float] = {}
    if config.n_outliers:
        injectable = [n for n in continuous if n not in ("height", "weight")]
        for _ in range(config.n_outliers):
            row = int(rng.integers(0, config.n))
            name = injectable[int(rng.integers(0, len(injectable)))]
            mean, sd = config.continuous[name]
            sign = 1.0 if rng.uniform() < 0.5 else -1.0
            outlier_cells[(row, name)] = float("%.6g" % (mean + sign * 5.0 * sd))

    records = []
    for i in range(config.n):
        values: dict[str, float | str | None] = {}
        for spec in schema.features:
            if spec.kind == CATEGORICAL:
                values[spec.name] = str(categorical[spec.name][i])
            elif spec.name == "bmi":
                values[spec.name] = None if (missing_height[i] or missing_weight[i]) \
                    else float(bmi[i])
            elif spec.name == "height":
                values[spec.name] = None if missing_height[i] else float(height[i])
            elif spec.name == "weight":
                values[spec.name] = None if missing_weight[i] else float(weight[i])
            else:
                values[spec.name] = float(continuous[spec.name][i])
        for (row, name), v in outlier_cells.items():
            if row == i and values[name] is not None:
                values[name] = v
        records.append(PatientRecord(values=values, label=int(labels[i])))
    return CohortTable(schema=schema, records=tuple(records))
