"""Bootstrap-aggregated forest of Gini decision trees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..rng import STREAM_FOREST, substream
from .tree import DecisionTree, TreeParams, fit_tree


@dataclass(frozen=True)
class ForestParams:
    """Forest knobs; ``max_features='sqrt'`` draws ceil(sqrt(d)) per node."""

    n_trees: int = 100
    max_features: int | str | None = "sqrt"
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if isinstance(self.max_features, str) and self.max_features not in ("sqrt", "all"):
            raise ValueError(f"max_features string must be 'sqrt' or 'all', got {self.max_features!r}")
        if isinstance(self.max_features, int) and self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def _resolve_max_features(setting, d: int) -> int:
    if setting is None or setting == "all":
        return d
    if setting == "sqrt":
        return min(d, math.ceil(math.sqrt(d)))
    return min(d, int(setting))


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_classes: int
    params: ForestParams

    def predict_proba(self, X) -> np.ndarray:
        """Mean of the per-tree leaf class distributions."""
        X = np.asarray(X, dtype=np.float64)
        acc = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


def fit_forest(X, y, params: ForestParams = ForestParams(), n_classes: int | None = None) -> ForestModel:
    """Fit ``n_trees`` Gini trees, each on a bootstrap resample of the rows.

    Bootstrap draws are handed to the grower as row multiplicities rather
    than materialized duplicates, so every tree shares a single presort of
    ``X``.  Every tree draws ``max_features`` candidate features per node
    from its own substream, so fits are reproducible tree by tree.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a non-empty (n, d) matrix with aligned labels")
    n, d = X.shape
    c = n_classes if n_classes is not None else int(y.max()) + 1
    m = _resolve_max_features(params.max_features, d)
    tree_params = TreeParams(max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf)
    presorted = np.argsort(X, axis=0, kind="stable")

    trees = []
    for t in range(params.n_trees):
        rng = substream(params.seed, STREAM_FOREST, t)
        weights = None
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            weights = np.bincount(rows, minlength=n).astype(np.float64)
        subsampler = None if m >= d else (lambda: rng.permutation(d)[:m])
        trees.append(
            fit_tree(
                X,
                y,
                tree_params,
                n_classes=c,
                feature_subsampler=subsampler,
                presorted=presorted,
                row_weights=weights,
            )
        )
    return ForestModel(trees=trees, n_classes=c, params=params)


def predict_forest(model: ForestModel, X) -> np.ndarray:
    return model.predict(X)


def predict_forest_proba(model: ForestModel, X) -> np.ndarray:
    return model.predict_proba(X)
