"""Feature attribution and interpretability tooling."""

from .api import ExplanationBundle, explain_record
from .local import (
    DecisionPath,
    ForceArrow,
    ForceExplanation,
    NeighborRow,
    NeighborSet,
    PathStep,
    decision_path,
    force_plot_data,
    knn_neighbors,
)
from .rankings import (
    ImportanceRanking,
    L1SurvivalReport,
    RankingEntry,
    TopFeatureComparison,
    aggregate_to_sources,
    compare_top_features,
    gini_importance,
    l1_selected_features,
    lr_coefficients,
    shap_importance,
)
from .shapley import (
    EXACT_FEATURE_GUARD,
    Attribution,
    BackgroundSet,
    sample_background,
    sampled_phi_batch,
    shapley_exact,
    shapley_sampled,
    shapley_weights,
    tree_shapley,
    tree_shapley_batch,
)

__all__ = [
    "Attribution",
    "BackgroundSet",
    "DecisionPath",
    "EXACT_FEATURE_GUARD",
    "ExplanationBundle",
    "ForceArrow",
    "ForceExplanation",
    "ImportanceRanking",
    "L1SurvivalReport",
    "NeighborRow",
    "NeighborSet",
    "PathStep",
    "RankingEntry",
    "TopFeatureComparison",
    "aggregate_to_sources",
    "compare_top_features",
    "decision_path",
    "explain_record",
    "force_plot_data",
    "gini_importance",
    "knn_neighbors",
    "l1_selected_features",
    "lr_coefficients",
    "sample_background",
    "sampled_phi_batch",
    "shap_importance",
    "shapley_exact",
    "shapley_sampled",
    "shapley_weights",
    "tree_shapley",
    "tree_shapley_batch",
]
