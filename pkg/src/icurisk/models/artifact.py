"""Self-describing model artifacts.

A trained model is stored as one JSON document carrying the model family and
parameters plus everything needed to score a raw patient record: the feature
schema, the encoded column layout, the fitted standardizer, the BMI
regression used during preprocessing, and a background sample for
explanations. Floats serialize at full precision (repr round-trip), so a
loaded model predicts identically to the saved one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ..cohort import FeatureSchema, FeatureSpec
from ..errors import ArtifactError, ConfigError
from ..preprocess import (
    BmiRegression,
    ColumnMeta,
    StandardizerState,
    encode_row,
    standardize_row,
)
from .forest import ForestModel
from .knn import KnnModel
from .logistic import LogisticModel
from .mlp import MlpModel
from .tree import TreeModel, TreeNode

FORMAT_VERSION = 1
FAMILIES = ("logistic", "tree", "forest", "knn", "mlp")


@dataclass
class TrainedModel:
    """One fitted classifier behind the raw-record prediction contract."""

    family: str
    model: LogisticModel | TreeModel | ForestModel | KnnModel | MlpModel
    schema: FeatureSchema
    columns: tuple[ColumnMeta, ...]
    standardizer: StandardizerState
    bmi_regression: BmiRegression | None = None
    background: np.ndarray | None = None
    metrics: dict | None = None

    def encode_features(self, features: Mapping) -> np.ndarray:
        """Raw feature mapping -> standardized encoded row."""
        raw = encode_row(self.schema, self.columns, dict(features))
        return standardize_row(self.standardizer, raw)

    def predict_proba(self, features: Mapping) -> float:
        row = self.encode_features(features)
        return float(self.model.predict_proba_matrix(row[None, :])[0])

    def predict_label(self, features: Mapping, threshold: float = 0.5) -> int:
        return int(self.predict_proba(features) >= threshold)

    def predict_proba_std(self, x: np.ndarray) -> np.ndarray:
        """Predict on already standardized encoded rows."""
        return self.model.predict_proba_matrix(x)


def predict_proba(model: TrainedModel, features: Mapping) -> float:
    return model.predict_proba(features)


def predict_label(model: TrainedModel, features: Mapping, threshold: float = 0.5) -> int:
    return model.predict_label(features, threshold)


# ---------------------------------------------------------------------------
# JSON conversion


def _schema_to_json(schema: FeatureSchema) -> dict:
    return {
        "features": [
            {"name": f.name, "kind": f.kind, "unit": f.unit,
             "categories": list(f.categories)}
            for f in schema.features
        ],
        "target": schema.target,
    }


def _schema_from_json(doc: dict) -> FeatureSchema:
    return FeatureSchema(
        features=tuple(FeatureSpec(f["name"], f["kind"], f["unit"],
                                   tuple(f["categories"])) for f in doc["features"]),
        target=doc["target"])


def _columns_to_json(columns: tuple[ColumnMeta, ...]) -> list:
    return [{"name": c.name, "source": c.source, "kind": c.kind,
             "category": c.category} for c in columns]


def _columns_from_json(doc: list) -> tuple[ColumnMeta, ...]:
    return tuple(ColumnMeta(c["name"], c["source"], c["kind"], c["category"])
                 for c in doc)


def _standardizer_to_json(state: StandardizerState) -> dict:
    return {"column_names": list(state.column_names),
            "means": state.means.tolist(),
            "scales": state.scales.tolist(),
            "zero_variance": list(state.zero_variance)}


def _standardizer_from_json(doc: dict) -> StandardizerState:
    return StandardizerState(column_names=tuple(doc["column_names"]),
                             means=np.array(doc["means"], dtype=float),
                             scales=np.array(doc["scales"], dtype=float),
                             zero_variance=tuple(doc["zero_variance"]))


def _node_to_json(node: TreeNode) -> dict:
    doc = {"n_rows": node.n_rows, "counts": list(node.counts),
           "impurity": node.impurity, "probability": node.probability}
    if not node.is_leaf:
        doc.update(column=node.column, threshold=node.threshold,
                   left=_node_to_json(node.left), right=_node_to_json(node.right))
    return doc


def _node_from_json(doc: dict) -> TreeNode:
    node = TreeNode(n_rows=doc["n_rows"], counts=tuple(doc["counts"]),
                    impurity=doc["impurity"], probability=doc["probability"])
    if "column" in doc:
        node.column = doc["column"]
        node.threshold = doc["threshold"]
        node.left = _node_from_json(doc["left"])
        node.right = _node_from_json(doc["right"])
    return node


def _parameters_to_json(family: str, model) -> dict:
    if family == "logistic":
        return {"weights": model.weights.tolist(), "intercept": model.intercept,
                "l1_lambda": model.l1_lambda, "epochs_run": model.epochs_run,
                "step": model.step, "converged": model.converged,
                "objective": model.objective}
    if family == "tree":
        return {"root": _node_to_json(model.root), "n_columns": model.n_columns,
                "max_depth": model.max_depth}
    if family == "forest":
        return {"trees": [{"root": _node_to_json(t.root), "max_depth": t.max_depth}
                          for t in model.trees],
                "n_columns": model.n_columns, "seed": model.seed,
                "max_features": model.max_features, "bootstrap": model.bootstrap}
    if family == "knn":
        return {"k": model.k, "weights": model.weights.tolist(),
                "x": model.x.tolist(), "labels": model.labels.tolist()}
    if family == "mlp":
        return {"sizes": list(model.sizes),
                "weights": [w.tolist() for w in model.weights],
                "biases": [b.tolist() for b in model.biases],
                "epochs_run": model.epochs_run, "final_loss": model.final_loss}
    raise ConfigError(f"unknown model family {family!r}")


def _parameters_from_json(family: str, doc: dict):
    if family == "logistic":
        return LogisticModel(weights=np.array(doc["weights"], dtype=float),
                             intercept=doc["intercept"], l1_lambda=doc["l1_lambda"],
                             epochs_run=doc["epochs_run"], step=doc["step"],
                             converged=doc["converged"], objective=doc["objective"])
    if family == "tree":
        return TreeModel(root=_node_from_json(doc["root"]),
                         n_columns=doc["n_columns"], max_depth=doc["max_depth"])
    if family == "forest":
        trees = [TreeModel(root=_node_from_json(t["root"]),
                           n_columns=doc["n_columns"], max_depth=t["max_depth"])
                 for t in doc["trees"]]
        return ForestModel(trees=trees, n_columns=doc["n_columns"], seed=doc["seed"],
                           max_features=doc["max_features"], bootstrap=doc["bootstrap"])
    if family == "knn":
        return KnnModel(x=np.array(doc["x"], dtype=float),
                        labels=np.array(doc["labels"], dtype=int),
                        k=doc["k"], weights=np.array(doc["weights"], dtype=float))
    if family == "mlp":
        return MlpModel(sizes=tuple(doc["sizes"]),
                        weights=[np.array(w, dtype=float) for w in doc["weights"]],
                        biases=[np.array(b, dtype=float) for b in doc["biases"]],
                        epochs_run=doc["epochs_run"], final_loss=doc["final_loss"])
    raise ArtifactError(f"unknown model family {family!r}")


def save_model(model: TrainedModel, path: str | Path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "schema": _schema_to_json(model.schema),
        "columns": _columns_to_json(model.columns),
        "standardizer": _standardizer_to_json(model.standardizer),
        "bmi_regression": None if model.bmi_regression is None else {
            "intercept": model.bmi_regression.intercept,
            "slope": model.bmi_regression.slope,
            "r_squared": model.bmi_regression.r_squared,
            "n_pairs": model.bmi_regression.n_pairs,
        },
        "background": None if model.background is None else model.background.tolist(),
        "metrics": model.metrics,
        "parameters": _parameters_to_json(model.family, model.model),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot parse model artifact {path}: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ArtifactError(f"{path} is not a model artifact")
    if doc["format_version"] != FORMAT_VERSION:
        raise ArtifactError(
            f"{path}: format version {doc['format_version']} is not supported "
            f"(expected {FORMAT_VERSION})")
    try:
        family = doc["family"]
        if family not in FAMILIES:
            raise ArtifactError(f"{path}: unknown family {family!r}")
        regression = doc.get("bmi_regression")
        background = doc.get("background")
        return TrainedModel(
            family=family,
            model=_parameters_from_json(family, doc["parameters"]),
            schema=_schema_from_json(doc["schema"]),
            columns=_columns_from_json(doc["columns"]),
            standardizer=_standardizer_from_json(doc["standardizer"]),
            bmi_regression=None if regression is None else BmiRegression(
                intercept=regression["intercept"], slope=regression["slope"],
                r_squared=regression["r_squared"], n_pairs=regression["n_pairs"]),
            background=None if background is None else np.array(background, dtype=float),
            metrics=doc.get("metrics"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed model artifact: {exc}") from exc
