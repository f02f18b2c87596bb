"""Gini-impurity decision tree built on the level-order grower."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._grow import TreeArrays, grow_tree, midpoint_threshold

#: Impurity decreases at or below this are treated as zero (no split).
MIN_IMPURITY_DECREASE = 1e-12


def gini_impurity(distribution) -> float:
    """Gini impurity 1 - sum(p^2) of a class distribution.

    Accepts raw counts or probabilities; counts are normalized first.
    An empty or all-zero distribution has impurity 0 by convention.
    """
    dist = np.asarray(distribution, dtype=np.float64)
    if dist.ndim != 1:
        raise ValueError(f"distribution must be 1-D, got shape {dist.shape}")
    if dist.size and dist.min() < 0:
        raise ValueError("distribution values must be non-negative")
    total = dist.sum()
    if total <= 0:
        return 0.0
    p = dist / total
    return float(1.0 - np.dot(p, p))


@dataclass(frozen=True)
class BestSplit:
    """Winning split of one node: feature index, threshold, impurity decrease."""

    feature: int
    threshold: float
    impurity_decrease: float


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0 or None, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")


def _one_hot_counts(y: np.ndarray, n_classes: int) -> np.ndarray:
    onehot = np.zeros((y.shape[0], n_classes))
    onehot[np.arange(y.shape[0]), y] = 1.0
    return onehot


def _gini_gain_scores(left: np.ndarray, right: np.ndarray, total: np.ndarray,
                      min_samples_leaf: int) -> np.ndarray:
    """Impurity decrease for each candidate boundary, -inf where a side is too small.

    With integer class counts c and row count n, the weighted-impurity
    decrease reduces to (sum(cL^2)/nL + sum(cR^2)/nR - sum(c^2)/n) / n,
    which stays exact apart from the final divisions.
    """
    n_left = left.sum(axis=1)
    n_right = right.sum(axis=1)
    n_total = n_left + n_right
    sq_left = np.einsum("ij,ij->i", left, left)
    sq_right = np.einsum("ij,ij->i", right, right)
    sq_total = np.einsum("ij,ij->i", total, total)
    safe_l = np.maximum(n_left, 1.0)
    safe_r = np.maximum(n_right, 1.0)
    safe_t = np.maximum(n_total, 1.0)
    scores = (sq_left / safe_l + sq_right / safe_r - sq_total / safe_t) / safe_t
    scores[(n_left < min_samples_leaf) | (n_right < min_samples_leaf)] = -np.inf
    return scores


def best_split(X, y, candidate_features=None, min_samples_leaf: int = 1,
               n_classes: int | None = None) -> BestSplit | None:
    """Exhaustive best Gini split of a single node, or None if nothing helps.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values of each candidate feature.  Ties on impurity decrease go to the
    lower feature index, then the lower threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) with labels aligned to rows")
    n, d = X.shape
    if n < 2:
        return None
    c = n_classes if n_classes is not None else int(y.max()) + 1
    features = np.arange(d) if candidate_features is None else np.asarray(candidate_features, dtype=np.int64)
    onehot = _one_hot_counts(y, c)
    total = onehot.sum(axis=0)

    best: BestSplit | None = None
    for f in np.sort(features):
        order = np.argsort(X[:, f], kind="stable")
        vals = X[order, f]
        running = np.cumsum(onehot[order], axis=0)
        left = running[:-1]
        right = total[None, :] - left
        scores = _gini_gain_scores(left, right, np.broadcast_to(total, left.shape), min_samples_leaf)
        scores[vals[:-1] >= vals[1:]] = -np.inf
        pos = int(np.argmax(scores))
        score = float(scores[pos])
        if score <= MIN_IMPURITY_DECREASE:
            continue
        if best is None or score > best.impurity_decrease:
            thr = float(midpoint_threshold(vals[pos], vals[pos + 1]))
            best = BestSplit(feature=int(f), threshold=thr, impurity_decrease=score)
    return best


@dataclass
class DecisionTree:
    """A fitted classification tree; leaf payloads are class counts."""

    arrays: TreeArrays
    n_classes: int
    params: TreeParams

    @property
    def n_nodes(self) -> int:
        return self.arrays.n_nodes

    def leaf_distribution(self, row) -> np.ndarray:
        """Normalized class distribution of the leaf a single row lands in."""
        counts = self.arrays.value[self.arrays.apply(np.asarray(row, dtype=np.float64)[None, :])[0]]
        return counts / counts.sum()

    def predict_proba(self, X) -> np.ndarray:
        leaves = self.arrays.apply(X)
        counts = self.arrays.value[leaves]
        return counts / counts.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


def fit_tree(
    X,
    y,
    params: TreeParams = TreeParams(),
    n_classes: int | None = None,
    feature_subsampler: Callable[[], np.ndarray] | None = None,
    presorted: np.ndarray | None = None,
    row_weights: np.ndarray | None = None,
) -> DecisionTree:
    """Grow a Gini-impurity tree until purity or the configured limits.

    ``feature_subsampler`` is invoked once per splittable node and must
    return the candidate feature indices for that node (used by the forest
    for per-node feature bagging).  ``row_weights`` are integer row
    multiplicities, equivalent to duplicating rows; the forest passes
    bootstrap draws this way so all trees share one presorted ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a non-empty (n, d) matrix with aligned labels")
    if y.min() < 0:
        raise ValueError("labels must be non-negative class codes")
    c = n_classes if n_classes is not None else int(y.max()) + 1
    if y.max() >= c:
        raise ValueError(f"labels exceed the declared {c} classes")
    msl = params.min_samples_leaf

    def scorer(left, right, total):
        return _gini_gain_scores(left, right, total, msl)

    def can_split(totals, rows):
        # splittable: big enough for two leaves and not yet pure
        return (rows >= 2 * msl) & (totals.max(axis=1) < rows)

    # Nodes split on the best valid boundary even at zero impurity decrease
    # (a node is a leaf only when pure, at a limit, or indivisible), so
    # patterns like XOR, where the first useful cut has no immediate gain,
    # still get separated.
    arrays = grow_tree(
        X,
        _one_hot_counts(y, c),
        score_positions=scorer,
        can_split_node=can_split,
        leaf_payload=lambda totals: totals.copy(),
        max_depth=params.max_depth,
        min_score=-np.inf,
        candidate_features=feature_subsampler,
        presorted=presorted,
        row_weights=row_weights,
    )
    return DecisionTree(arrays=arrays, n_classes=c, params=params)


def predict_tree(tree: DecisionTree, row) -> np.ndarray:
    """Class distribution of the leaf a single feature vector reaches."""
    return tree.leaf_distribution(row)
