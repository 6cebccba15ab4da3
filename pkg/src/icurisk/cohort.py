"""Patient cohort schema, records, and CSV serialization.

A cohort is a fixed feature schema plus an ordered list of patient records,
one per ICU stay, labelled with 28-day post-discharge mortality. Cohorts
round-trip through a plain CSV format (see `save_cohort`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

from .errors import CohortFormatError, CohortValidationError

TARGET_NAME = "mortality_28d"

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

SERVICE_UNITS = ("CCU", "CSRU", "MICU", "SICU", "TSICU")
GENDERS = ("M", "F")
ETHNICITIES = ("WHITE", "BLACK", "HISPANIC", "ASIAN", "OTHER")


@dataclass(frozen=True)
class FeatureSpec:
    """One feature descriptor: name, kind, unit, and categories if nominal."""

    name: str
    kind: str
    unit: str = ""
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise CohortValidationError(f"unknown feature kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise CohortValidationError(f"categorical feature {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise CohortValidationError(f"duplicate categories for {self.name!r}")
        elif self.categories:
            raise CohortValidationError(f"continuous feature {self.name!r} cannot have categories")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature descriptors plus the binary target name."""

    features: tuple[FeatureSpec, ...]
    target: str = TARGET_NAME

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise CohortValidationError("feature names must be unique")
        if self.target in names:
            raise CohortValidationError("target name collides with a feature name")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def continuous_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.kind == CONTINUOUS)

    @property
    def categorical_features(self) -> tuple[FeatureSpec, ...]:
        return tuple(f for f in self.features if f.kind == CATEGORICAL)

    def spec(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(f.name == name for f in self.features)


@dataclass(frozen=True)
class PatientRecord:
    """One ICU stay: a value per schema feature and the mortality label.

    Continuous values may be None (missing). Categorical values are
    category strings.
    """

    values: Mapping[str, float | str | None]
    label: int

    def get(self, name: str):
        return self.values[name]

    def with_values(self, **updates) -> "PatientRecord":
        merged = dict(self.values)
        merged.update(updates)
        return PatientRecord(values=merged, label=self.label)


@dataclass(frozen=True)
class CohortTable:
    """A schema plus an ordered, schema-conforming list of records."""

    schema: FeatureSchema
    records: tuple[PatientRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PatientRecord]:
        return iter(self.records)

    def replace_records(self, records) -> "CohortTable":
        return CohortTable(schema=self.schema, records=tuple(records))


def default_schema() -> FeatureSchema:
    """The fixed 25-feature ICU-stay schema used throughout the toolkit."""
    return FeatureSchema(features=(
        FeatureSpec("service_unit", CATEGORICAL, categories=SERVICE_UNITS),
        FeatureSpec("gender", CATEGORICAL, categories=GENDERS),
        FeatureSpec("ethnicity", CATEGORICAL, categories=ETHNICITIES),
        FeatureSpec("age", CONTINUOUS, "years"),
        FeatureSpec("height", CONTINUOUS, "m"),
        FeatureSpec("weight", CONTINUOUS, "kg"),
        FeatureSpec("bmi", CONTINUOUS, "kg/m^2"),
        FeatureSpec("length_of_stay", CONTINUOUS, "days"),
        FeatureSpec("bun", CONTINUOUS, "mg/dL"),
        FeatureSpec("chloride", CONTINUOUS, "mEq/L"),
        FeatureSpec("creatinine", CONTINUOUS, "mg/dL"),
        FeatureSpec("hemoglobin", CONTINUOUS, "g/dL"),
        FeatureSpec("platelet", CONTINUOUS, "K/uL"),
        FeatureSpec("potassium", CONTINUOUS, "mEq/L"),
        FeatureSpec("sodium", CONTINUOUS, "mEq/L"),
        FeatureSpec("total_co2", CONTINUOUS, "mEq/L"),
        FeatureSpec("wbc", CONTINUOUS, "K/uL"),
        FeatureSpec("temperature", CONTINUOUS, "C"),
        FeatureSpec("heart_rate", CONTINUOUS, "bpm"),
        FeatureSpec("spo2", CONTINUOUS, "%"),
        FeatureSpec("sys_bp", CONTINUOUS, "mmHg"),
        FeatureSpec("dias_bp", CONTINUOUS, "mmHg"),
        FeatureSpec("map", CONTINUOUS, "mmHg"),
        FeatureSpec("sofa", CONTINUOUS, ""),
        FeatureSpec("egfr", CONTINUOUS, "mL/min/1.73m^2"),
    ))


# Population statistics used for synthetic generation defaults and for the
# display ranges the service exposes to form renderers. Values for age, bun,
# heart_rate, sofa, wbc, length_of_stay, map, sys_bp, temperature,
# hemoglobin, and bmi follow the published reference cohort; the rest are
# plausible ICU figures chosen so that a 3.5-sigma band stays physiological.
POPULATION_STATS: dict[str, tuple[float, float]] = {
    "age": (63.2, 16.2),
    "height": (1.70, 0.10),
    "weight": (80.0, 15.0),
    "bmi": (28.1, 6.4),
    "length_of_stay": (3.9, 6.4),
    "bun": (22.4, 15.6),
    "chloride": (104.0, 5.0),
    "creatinine": (1.2, 0.3),
    "hemoglobin": (10.5, 1.7),
    "platelet": (240.0, 60.0),
    "potassium": (4.2, 0.5),
    "sodium": (138.0, 4.0),
    "total_co2": (25.0, 4.0),
    "wbc": (10.5, 4.7),
    "temperature": (36.9, 0.5),
    "heart_rate": (83.9, 13.8),
    "spo2": (96.8, 1.5),
    "sys_bp": (119.9, 15.9),
    "dias_bp": (61.0, 10.0),
    "map": (77.9, 10.2),
    "sofa": (4.1, 3.0),
    "egfr": (65.0, 18.0),
}

CATEGORY_PROBS: dict[str, dict[str, float]] = {
    "service_unit": {"CCU": 0.16, "CSRU": 0.22, "MICU": 0.30, "SICU": 0.17, "TSICU": 0.15},
    "gender": {"M": 0.56, "F": 0.44},
    "ethnicity": {"WHITE": 0.70, "BLACK": 0.09, "HISPANIC": 0.04, "ASIAN": 0.03, "OTHER": 0.14},
}


def format_value(x: float) -> str:
    """Render a number at 6 significant digits, the cohort CSV convention."""
    return "%.6g" % x


def _format_cell(value: float | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return format_value(value)


def validate_record(record: PatientRecord, schema: FeatureSchema,
                    row: int | None = None) -> None:
    """Raise CohortValidationError if the record violates the schema."""
    for spec in schema.features:
        if spec.name not in record.values:
            raise CohortValidationError(f"record is missing feature {spec.name!r}",
                                        row=row, feature=spec.name)
        value = record.values[spec.name]
        if value is None:
            continue
        if spec.kind == CATEGORICAL:
            if value not in spec.categories:
                raise CohortValidationError(
                    f"unknown category {value!r} for feature {spec.name!r}"
                    + (f" at row {row}" if row is not None else ""),
                    row=row, feature=spec.name)
        elif isinstance(value, str):
            raise CohortValidationError(f"continuous feature {spec.name!r} has text value",
                                        row=row, feature=spec.name)
    if record.label not in (0, 1):
        raise CohortValidationError(f"label must be 0 or 1, got {record.label!r}", row=row)


def save_cohort(table: CohortTable, path: str | Path) -> None:
    """Write a cohort as UTF-8 CSV: header row, one row per record.

    Missing values become empty fields; numbers are fixed at 6 significant
    digits so that save/load/save is byte-identical.
    """
    path = Path(path)
    header = list(table.schema.names) + [table.schema.target]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for record in table.records:
            row = [_format_cell(record.values[name]) for name in table.schema.names]
            row.append(str(record.label))
            writer.writerow(row)


def load_cohort(path: str | Path, schema: FeatureSchema | None = None) -> CohortTable:
    """Read a cohort CSV, validating each cell against the schema.

    Row numbers in error messages are 1-based data rows (the header is
    row 0). Empty cells load as missing values.
    """
    schema = schema or default_schema()
    path = Path(path)
    expected = list(schema.names) + [schema.target]
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortFormatError(f"{path}: empty file, expected a header row")
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            if missing:
                raise CohortFormatError(f"{path}: missing column {missing[0]!r}")
            if extra:
                raise CohortFormatError(f"{path}: unexpected column {extra[0]!r}")
            raise CohortFormatError(f"{path}: columns out of order; expected {expected}")
        records = []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(expected):
                raise CohortFormatError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(expected)}")
            values: dict[str, float | str | None] = {}
            for spec, cell in zip(schema.features, row):
                if cell == "":
                    values[spec.name] = None
                elif spec.kind == CATEGORICAL:
                    values[spec.name] = cell
                else:
                    try:
                        values[spec.name] = float(cell)
                    except ValueError:
                        raise CohortFormatError(
                            f"{path}: row {row_num}: non-numeric value {cell!r} "
                            f"for continuous feature {spec.name!r}")
            label_cell = row[-1]
            if label_cell not in ("0", "1"):
                raise CohortFormatError(
                    f"{path}: row {row_num}: label must be 0 or 1, got {label_cell!r}")
            record = PatientRecord(values=values, label=int(label_cell))
            validate_record(record, schema, row=row_num)
            records.append(record)
    return CohortTable(schema=schema, records=tuple(records))
