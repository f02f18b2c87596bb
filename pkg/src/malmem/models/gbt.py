"""Gradient-boosted trees with softmax coupling, one tree per class per round.

Each round fits second-order regression trees to the gradient/hessian of
the softmax cross-entropy (g = p - y, h = p(1 - p)).  Leaves take the
regularized Newton step w = -soft_threshold(G, alpha) / (H + lambda) and
splits maximize the standard gain
0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)).
Logits start at zero (a uniform base score), so a round-0 model predicts
the uniform distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._grow import TreeArrays, bin_columns, grow_tree_hist
from .common import mean_cross_entropy, one_hot, softmax


@dataclass(frozen=True)
class GbtParams:
    learning_rate: float = 0.3
    n_rounds: int = 100
    max_depth: int = 6
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.reg_lambda < 0 or self.reg_alpha < 0:
            raise ValueError("regularization constants must be non-negative")
        if self.min_child_weight < 0:
            raise ValueError(f"min_child_weight must be >= 0, got {self.min_child_weight}")


def soft_threshold(value: float, alpha: float) -> float:
    """Shrink ``value`` toward zero by ``alpha``, clamping at zero."""
    if value > alpha:
        return value - alpha
    if value < -alpha:
        return value + alpha
    return 0.0


def _leaf_weights(totals: np.ndarray, reg_lambda: float, reg_alpha: float) -> np.ndarray:
    g = totals[:, 0]
    h = totals[:, 1]
    shrunk = np.sign(g) * np.maximum(np.abs(g) - reg_alpha, 0.0)
    denom = h + reg_lambda
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(denom > 0, -shrunk / np.where(denom > 0, denom, 1.0), 0.0)
    return w[:, None]


def _gain_scores(left, right, total, reg_lambda, min_child_weight):
    gl, hl = left[:, 0], left[:, 1]
    gr, hr = right[:, 0], right[:, 1]
    gt, ht = total[:, 0], total[:, 1]
    gain = 0.5 * (
        gl * gl / (hl + reg_lambda)
        + gr * gr / (hr + reg_lambda)
        - gt * gt / (ht + reg_lambda)
    )
    gain[(hl < min_child_weight) | (hr < min_child_weight)] = -np.inf
    return gain


@dataclass
class GbtModel:
    """Fitted booster: trees[round][class] plus the training loss curve."""

    trees: list[list[TreeArrays]]
    n_classes: int
    params: GbtParams
    train_loss: list[float] = field(default_factory=list)

    def decision_logits(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        logits = np.zeros((X.shape[0], self.n_classes))
        for round_trees in self.trees:
            for code, tree in enumerate(round_trees):
                logits[:, code] += self.params.learning_rate * tree.value[tree.apply(X), 0]
        return logits

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_logits(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


def fit_gbt(X, y, params: GbtParams = GbtParams(), n_classes: int | None = None) -> GbtModel:
    """Boost for ``n_rounds``, recording training cross-entropy after each round."""
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a non-empty (n, d) matrix with aligned labels")
    c = n_classes if n_classes is not None else int(y.max()) + 1
    if c < 2:
        raise ValueError("boosting needs at least 2 classes")
    n = X.shape[0]
    target = one_hot(y, c)
    # Bin once per fit; every tree of every round scores splits on the
    # same quantile histogram boundaries.
    codes, edges = bin_columns(X)
    logits = np.zeros((n, c))

    reg_lambda, reg_alpha, mcw = params.reg_lambda, params.reg_alpha, params.min_child_weight

    def scorer(left, right, total):
        return _gain_scores(left, right, total, reg_lambda, mcw)

    def can_split(totals, rows):
        # both children need hessian mass >= min_child_weight
        return (rows >= 2) & (totals[:, 1] >= 2 * mcw)

    model = GbtModel(trees=[], n_classes=c, params=params)
    for _ in range(params.n_rounds):
        probs = softmax(logits)
        grad = probs - target
        hess = probs * (1.0 - probs)
        round_trees = []
        for code in range(c):
            stats = np.concatenate([grad[:, code : code + 1], hess[:, code : code + 1]], axis=1)
            tree = grow_tree_hist(
                codes,
                edges,
                stats,
                score_positions=scorer,
                can_split_node=can_split,
                leaf_payload=lambda totals: _leaf_weights(totals, reg_lambda, reg_alpha),
                max_depth=params.max_depth,
                min_score=0.0,
            )
            logits[:, code] += params.learning_rate * tree.value[tree.apply(X), 0]
            round_trees.append(tree)
        model.trees.append(round_trees)
        model.train_loss.append(mean_cross_entropy(target, softmax(logits)))
    return model


def predict_gbt(model: GbtModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class codes and the softmax probabilities behind them."""
    proba = model.predict_proba(X)
    return proba.argmax(axis=1), proba
