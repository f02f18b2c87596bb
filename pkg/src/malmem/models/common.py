"""Numerics shared by the probabilistic models."""
from __future__ import annotations

import numpy as np

PROBABILITY_FLOOR = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(target_dist: np.ndarray, predicted_dist: np.ndarray) -> float:
    """Cross-entropy -sum(p log q) with q floored at 1e-12 before the log."""
    p = np.asarray(target_dist, dtype=np.float64)
    q = np.clip(np.asarray(predicted_dist, dtype=np.float64), PROBABILITY_FLOOR, None)
    return float(-(p * np.log(q)).sum())


def mean_cross_entropy(target_rows: np.ndarray, predicted_rows: np.ndarray) -> float:
    """Mean row-wise cross-entropy over a batch."""
    p = np.asarray(target_rows, dtype=np.float64)
    q = np.clip(np.asarray(predicted_rows, dtype=np.float64), PROBABILITY_FLOOR, None)
    return float(-(p * np.log(q)).sum(axis=1).mean())


def one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((y.shape[0], n_classes))
    out[np.arange(y.shape[0]), y] = 1.0
    return out
