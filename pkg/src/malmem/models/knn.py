"""Majority-vote k-nearest-neighbor classifier over the raw training matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..neighbors import nearest_neighbors


@dataclass(frozen=True)
class KnnParams:
    k: int = 5
    metric: str = "euclidean"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if str(self.metric).lower() not in ("euclidean", "manhattan"):
            raise ValueError(f"metric must be 'euclidean' or 'manhattan', got {self.metric!r}")


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    n_classes: int
    params: KnnParams

    def _votes(self, X) -> np.ndarray:
        neigh = nearest_neighbors(self.X, np.asarray(X, dtype=np.float64),
                                  self.params.k, metric=self.params.metric)
        labels = self.y[neigh]
        counts = np.zeros((labels.shape[0], self.n_classes), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(labels.shape[0]), labels.shape[1]), labels.ravel()), 1)
        return counts

    def predict_proba(self, X) -> np.ndarray:
        votes = self._votes(X)
        return votes / votes.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        # argmax takes the first maximum, so vote ties go to the lowest code.
        return self._votes(X).argmax(axis=1)


def fit_knn(X, y, params: KnnParams = KnnParams(), n_classes: int | None = None) -> KnnModel:
    """Store the training set; prediction does the work."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a non-empty (n, d) matrix with aligned labels")
    if params.k > X.shape[0]:
        raise ValueError(f"k={params.k} exceeds the {X.shape[0]} training rows")
    c = n_classes if n_classes is not None else int(y.max()) + 1
    return KnnModel(X=X, y=y, n_classes=c, params=params)


def predict_knn(model: KnnModel, X) -> np.ndarray:
    return model.predict(X)
