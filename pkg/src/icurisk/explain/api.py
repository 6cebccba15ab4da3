"""Record-level explanation entry point used by the service and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from ..models.artifact import TrainedModel
from ..models.forest import ForestModel
from ..models.knn import KnnModel
from ..models.tree import TreeModel
from .local import (
    DecisionPath,
    ForceExplanation,
    NeighborSet,
    decision_path,
    force_plot_data,
    knn_neighbors,
)
from .shapley import (
    EXACT_FEATURE_GUARD,
    Attribution,
    shapley_exact,
    shapley_sampled,
    tree_shapley,
)


@dataclass(frozen=True)
class ExplanationBundle:
    attribution: Attribution
    force: ForceExplanation
    decision_path: DecisionPath | None = None
    neighbors: NeighborSet | None = None


def _display_values(trained: TrainedModel, features: Mapping, raw_row) -> tuple:
    values = []
    for i, col in enumerate(trained.columns):
        if col.kind == "continuous":
            values.append(float(features[col.source]))
        else:
            values.append(int(raw_row[i]))
    return tuple(values)


def explain_record(trained: TrainedModel, features: Mapping, mode: str = "auto",
                   n_permutations: int = 200, seed: int = 0,
                   background: np.ndarray | None = None) -> ExplanationBundle:
    """Attribute one raw record's prediction and collect model-specific views.

    Mode "auto" picks the exact path-dependent game for trees and forests,
    exact enumeration when the column count is within the guard, and the
    permutation estimator otherwise. Tree models also report the decision
    path, k-NN models the neighbor table.
    """
    row_std = trained.encode_features(features)
    from ..preprocess import encode_row  # local import to avoid cycle at load
    raw_row = encode_row(trained.schema, trained.columns, dict(features))
    names = tuple(c.name for c in trained.columns)
    displays = _display_values(trained, features, raw_row)
    model = trained.model
    predict = model.predict_proba_matrix
    p = len(trained.columns)

    if mode not in ("auto", "exact", "sampled", "tree"):
        raise ConfigError(f"unknown explanation mode {mode!r}")
    is_tree = isinstance(model, (TreeModel, ForestModel))
    if mode == "tree" and not is_tree:
        raise ConfigError("tree mode requires a tree or forest model")

    if is_tree and mode in ("auto", "tree", "exact"):
        attribution = tree_shapley(model, row_std, feature_names=names,
                                   display_values=displays)
    else:
        if background is None:
            background = trained.background
        if background is None:
            raise ConfigError("model artifact carries no background sample; "
                              "pass one explicitly")
        if mode == "exact" or (mode == "auto" and p <= EXACT_FEATURE_GUARD):
            attribution = shapley_exact(predict, row_std, background,
                                        feature_names=names, display_values=displays)
        else:
            attribution = shapley_sampled(predict, row_std, background,
                                          n_permutations=n_permutations, seed=seed,
                                          feature_names=names,
                                          display_values=displays)

    path = None
    neighbors = None
    if isinstance(model, TreeModel):
        path = decision_path(model, row_std, trained.columns, trained.standardizer)
    if isinstance(model, KnnModel):
        neighbors = knn_neighbors(model, row_std, trained.columns,
                                  trained.standardizer, trained.schema)
    return ExplanationBundle(attribution=attribution,
                             force=force_plot_data(attribution),
                             decision_path=path, neighbors=neighbors)
