"""Exact brute-force nearest-neighbor search, batched for large matrices.

Neighbor order is exact: ascending distance, ties broken by ascending row
index.  Euclidean distances use the expanded quadratic form for speed, then
candidate distances are recomputed directly so that ordering (and therefore
tie-breaking) never depends on the rounding noise of the fast path.  Memory
stays bounded by processing queries in chunks.
"""
from __future__ import annotations

import numpy as np

_CHUNK_CELLS = 2 ** 25  # ~32M float64 cells (~256 MB) per distance chunk
_TIE_PAD = 32


def _validate_metric(metric: str) -> str:
    m = str(metric).lower()
    if m not in ("euclidean", "manhattan"):
        raise ValueError(f"metric must be 'euclidean' or 'manhattan', got {metric!r}")
    return m


def squared_euclidean(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances via ||a||^2 + ||b||^2 - 2ab."""
    q2 = np.einsum("ij,ij->i", queries, queries)
    r2 = np.einsum("ij,ij->i", refs, refs)
    d = q2[:, None] + r2[None, :] - 2.0 * (queries @ refs.T)
    np.maximum(d, 0.0, out=d)
    return d


def manhattan(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Pairwise L1 distances, accumulated one feature at a time to bound memory."""
    out = np.zeros((queries.shape[0], refs.shape[0]), dtype=np.float64)
    for j in range(queries.shape[1]):
        out += np.abs(queries[:, j][:, None] - refs[:, j][None, :])
    return out


def _exact_rowwise(query: np.ndarray, refs: np.ndarray, metric: str) -> np.ndarray:
    diff = refs - query[None, :]
    if metric == "euclidean":
        return np.einsum("ij,ij->i", diff, diff)
    return np.abs(diff).sum(axis=1)


def nearest_neighbors(
    refs: np.ndarray,
    queries: np.ndarray,
    k: int,
    metric: str = "euclidean",
    self_indices: np.ndarray | None = None,
) -> np.ndarray:
    """Indices of the k nearest reference rows for each query row.

    Args:
        refs: (n, d) reference matrix.
        queries: (q, d) query matrix.
        k: neighbors per query, 1 <= k <= eligible references.
        metric: 'euclidean' or 'manhattan'.
        self_indices: optional (q,) array; self_indices[i] is a reference row
            excluded from query i's neighbors (a query that is itself a
            reference row).

    Returns:
        (q, k) int64 array, each row ordered by (distance, reference index).
    """
    metric = _validate_metric(metric)
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    n = refs.shape[0]
    eligible = n - (1 if self_indices is not None else 0)
    if not 1 <= k <= eligible:
        raise ValueError(f"k must be in [1, {eligible}] for {n} reference rows, got {k}")
    if queries.shape[1] != refs.shape[1]:
        raise ValueError("query width does not match reference width")
    if self_indices is not None:
        self_indices = np.asarray(self_indices, dtype=np.int64)
        if self_indices.shape[0] != queries.shape[0]:
            raise ValueError("self_indices must align with queries")

    q_total = queries.shape[0]
    out = np.empty((q_total, k), dtype=np.int64)
    chunk = max(1, min(q_total, _CHUNK_CELLS // max(n, 1)))
    pad = min(n, k + _TIE_PAD)
    ref_rows = np.arange(n)

    for start in range(0, q_total, chunk):
        stop = min(start + chunk, q_total)
        qc = queries[start:stop]
        if metric == "euclidean":
            dist = squared_euclidean(qc, refs)
        else:
            dist = manhattan(qc, refs)
        if self_indices is not None:
            dist[np.arange(stop - start), self_indices[start:stop]] = np.inf

        if pad >= n:
            ranked = np.argsort(dist, axis=1, kind="stable")[:, :k]
            out[start:stop] = ranked
            continue

        cand = np.argpartition(dist, pad - 1, axis=1)[:, :pad]
        # Re-rank candidates on exactly computed distances so that equal rows
        # really tie and fall back to index order.
        cand_sorted = np.sort(cand, axis=1)
        diff = refs[cand_sorted] - qc[:, None, :]
        if metric == "euclidean":
            exact = np.einsum("ijk,ijk->ij", diff, diff)
        else:
            exact = np.abs(diff).sum(axis=2)
        if self_indices is not None:
            exact[cand_sorted == self_indices[start:stop, None]] = np.inf
        order = np.argsort(exact, axis=1, kind="stable")
        top = np.take_along_axis(cand_sorted, order[:, :k], axis=1)
        kth = np.take_along_axis(exact, order[:, k - 1 : k], axis=1)

        # A tie plateau at the k-th distance can spill past the candidate
        # buffer; those rows get an exact full scan.
        margin = kth * 1e-9 + 1e-12
        spill = (dist <= kth + margin).sum(axis=1) > pad
        for i in np.flatnonzero(spill):
            full = _exact_rowwise(qc[i], refs, metric)
            if self_indices is not None:
                full[self_indices[start + i]] = np.inf
            ranked = np.lexsort((ref_rows, full))
            top[i] = ranked[:k]
        out[start:stop] = top
    return out


def k_nearest(
    features: np.ndarray,
    query,
    k: int,
    metric: str = "euclidean",
    exclude_self: bool = False,
) -> np.ndarray:
    """Ordered indices of the k nearest rows to a query.

    ``query`` is either a row index into ``features`` (enabling
    ``exclude_self``) or an explicit feature vector.
    """
    features = np.asarray(features, dtype=np.float64)
    if np.isscalar(query) or (isinstance(query, np.ndarray) and query.ndim == 0):
        idx = int(query)
        if not 0 <= idx < features.shape[0]:
            raise ValueError(f"query row {idx} out of range for {features.shape[0]} rows")
        vec = features[idx]
        self_idx = np.array([idx]) if exclude_self else None
    else:
        if exclude_self:
            raise ValueError("exclude_self requires the query to be a row index")
        vec = np.asarray(query, dtype=np.float64)
        if vec.shape != (features.shape[1],):
            raise ValueError(f"query vector must have shape ({features.shape[1]},)")
        self_idx = None
    result = nearest_neighbors(features, vec[None, :], k, metric=metric, self_indices=self_idx)
    return result[0]
