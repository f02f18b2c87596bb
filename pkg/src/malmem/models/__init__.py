"""From-scratch classifiers: decision tree, forest, KNN, boosted trees, MLP."""
from .common import cross_entropy, mean_cross_entropy, one_hot, softmax
from .forest import ForestModel, ForestParams, fit_forest, predict_forest, predict_forest_proba
from .gbt import GbtModel, GbtParams, fit_gbt, predict_gbt, soft_threshold
from .knn import KnnModel, KnnParams, fit_knn, predict_knn
from .mlp import MlpModel, MlpParams, fit_mlp, mlp_forward, mlp_gradients, predict_mlp, predict_mlp_proba
from .tree import (
    BestSplit,
    DecisionTree,
    TreeParams,
    best_split,
    fit_tree,
    gini_impurity,
    predict_tree,
)

__all__ = [
    "BestSplit",
    "DecisionTree",
    "ForestModel",
    "ForestParams",
    "GbtModel",
    "GbtParams",
    "KnnModel",
    "KnnParams",
    "MlpModel",
    "MlpParams",
    "TreeParams",
    "best_split",
    "cross_entropy",
    "fit_forest",
    "fit_gbt",
    "fit_knn",
    "fit_mlp",
    "fit_tree",
    "gini_impurity",
    "mean_cross_entropy",
    "mlp_forward",
    "mlp_gradients",
    "one_hot",
    "predict_forest",
    "predict_forest_proba",
    "predict_gbt",
    "predict_knn",
    "predict_mlp",
    "predict_mlp_proba",
    "predict_tree",
    "soft_threshold",
    "softmax",
]
