"""Instance-level explanation payloads: force plots, decision paths, and
nearest-neighbor evidence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cohort import FeatureSchema
from ..errors import ConfigError
from ..models.knn import KnnModel
from ..models.tree import TreeModel
from ..preprocess import ColumnMeta, StandardizerState
from .shapley import Attribution


@dataclass(frozen=True)
class ForceArrow:
    feature: str
    raw_value: float | str
    phi: float


@dataclass(frozen=True)
class ForceExplanation:
    """Exactly what a force-plot renderer needs: opposing sorted arrows."""

    base: float
    prediction: float
    arrows: tuple[ForceArrow, ...]
    mode: str
    tolerance: float

    def positive_arrows(self) -> tuple[ForceArrow, ...]:
        return tuple(a for a in self.arrows if a.phi > 0)

    def negative_arrows(self) -> tuple[ForceArrow, ...]:
        return tuple(a for a in self.arrows if a.phi < 0)

    def to_json(self) -> dict:
        return {
            "base": self.base,
            "prediction": self.prediction,
            "arrows": [{"feature": a.feature, "raw_value": a.raw_value, "phi": a.phi}
                       for a in self.arrows],
            "mode": self.mode,
            "tolerance": self.tolerance,
        }


def force_plot_data(attribution: Attribution) -> ForceExplanation:
    """Zero contributions are dropped; positives then negatives, each by
    descending magnitude."""
    arrows = [ForceArrow(name, display, float(phi))
              for name, display, phi in zip(attribution.feature_names,
                                            attribution.display_values,
                                            attribution.phi)
              if phi != 0.0]
    positives = sorted((a for a in arrows if a.phi > 0), key=lambda a: -a.phi)
    negatives = sorted((a for a in arrows if a.phi < 0), key=lambda a: a.phi)
    return ForceExplanation(base=attribution.base_value,
                            prediction=attribution.prediction,
                            arrows=tuple(positives + negatives),
                            mode=attribution.mode,
                            tolerance=attribution.tolerance)


@dataclass(frozen=True)
class PathStep:
    feature: str
    comparator: str  # the condition the row satisfied: "<=" or ">"
    threshold: float  # raw units when a standardizer is given
    threshold_std: float


@dataclass(frozen=True)
class DecisionPath:
    steps: tuple[PathStep, ...]
    leaf_probability: float

    def rules(self) -> list[str]:
        return [f"{s.feature} {s.comparator} {s.threshold:g}" for s in self.steps]


def decision_path(model: TreeModel, row: np.ndarray,
                  columns: tuple[ColumnMeta, ...],
                  standardizer: StandardizerState | None = None) -> DecisionPath:
    """Root-to-leaf rule sequence for one standardized row.

    Thresholds are translated back to raw units for display when the fitted
    standardizer is available; indicator thresholds stay as-is.
    """
    row = np.asarray(row, dtype=float).ravel()
    steps = []
    node = model.root
    while not node.is_leaf:
        goes_left = row[node.column] <= node.threshold
        threshold = node.threshold
        if standardizer is not None and columns[node.column].kind == "continuous":
            threshold = node.threshold * standardizer.scales[node.column] \
                + standardizer.means[node.column]
        steps.append(PathStep(feature=columns[node.column].name,
                              comparator="<=" if goes_left else ">",
                              threshold=float(threshold),
                              threshold_std=float(node.threshold)))
        node = node.left if goes_left else node.right
    return DecisionPath(steps=tuple(steps), leaf_probability=node.probability)


@dataclass(frozen=True)
class NeighborRow:
    values: dict  # source feature -> display value
    label: int
    distance: float


@dataclass(frozen=True)
class NeighborSet:
    neighbors: tuple[NeighborRow, ...]
    k: int
    positive: int
    negative: int
    probability: float

    @property
    def vote_summary(self) -> str:
        return f"{self.positive} positive, {self.negative} negative"


def _display_row(row_std: np.ndarray, columns: tuple[ColumnMeta, ...],
                 standardizer: StandardizerState | None,
                 schema: FeatureSchema | None) -> dict:
    raw = row_std * standardizer.scales + standardizer.means \
        if standardizer is not None else row_std
    values: dict = {}
    indicator_best: dict[str, float] = {}
    for i, col in enumerate(columns):
        if col.kind == "continuous":
            values[col.source] = float(raw[i])
        else:
            # Pick the active category per source feature.
            if col.source not in values or raw[i] > indicator_best[col.source]:
                indicator_best[col.source] = raw[i]
                values[col.source] = col.category
    return values


def knn_neighbors(model: KnnModel, row: np.ndarray,
                  columns: tuple[ColumnMeta, ...],
                  standardizer: StandardizerState | None = None,
                  schema: FeatureSchema | None = None) -> NeighborSet:
    """The k nearest training rows with display values and a vote summary.

    The positive fraction equals the model's predicted probability for the
    same row by construction.
    """
    row = np.asarray(row, dtype=float).ravel()
    if len(columns) != row.size:
        raise ConfigError("row length does not match column metadata")
    indices, distances = model.kneighbors(row[None, :])
    neighbors = []
    positive = 0
    for idx, dist in zip(indices[0], distances[0]):
        label = int(model.labels[idx])
        positive += label
        neighbors.append(NeighborRow(
            values=_display_row(model.x[idx], columns, standardizer, schema),
            label=label, distance=float(dist)))
    k = model.k
    return NeighborSet(neighbors=tuple(neighbors), k=k, positive=positive,
                       negative=k - positive, probability=positive / k)
