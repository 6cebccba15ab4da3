"""The five classifier families and their serialization."""

from .artifact import (
    FAMILIES,
    FORMAT_VERSION,
    TrainedModel,
    load_model,
    predict_label,
    predict_proba,
    save_model,
)
from .forest import ForestConfig, ForestModel, forest_gini_decreases, train_forest
from .knn import KnnConfig, KnnModel, train_knn
from .logistic import LogisticConfig, LogisticModel, lambda_max, train_logistic
from .mlp import MlpConfig, MlpModel, init_parameters, loss_and_grads, train_mlp
from .tree import TreeConfig, TreeModel, TreeNode, gini, gini_decreases, train_tree

__all__ = [
    "FAMILIES",
    "FORMAT_VERSION",
    "TrainedModel",
    "load_model",
    "save_model",
    "predict_proba",
    "predict_label",
    "LogisticConfig",
    "LogisticModel",
    "train_logistic",
    "lambda_max",
    "TreeConfig",
    "TreeModel",
    "TreeNode",
    "gini",
    "gini_decreases",
    "train_tree",
    "ForestConfig",
    "ForestModel",
    "forest_gini_decreases",
    "train_forest",
    "KnnConfig",
    "KnnModel",
    "train_knn",
    "MlpConfig",
    "MlpModel",
    "train_mlp",
    "loss_and_grads",
    "init_parameters",
]
