import numpy as np
import pytest

import malmem.neighbors as nb
from malmem.neighbors import k_nearest, manhattan, nearest_neighbors, squared_euclidean


def brute_force_neighbors(refs, queries, k, metric="euclidean", self_indices=None):
    """Independent O(n*q) oracle with (distance, row index) tie order."""
    refs = np.asarray(refs, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for qi, q in enumerate(queries):
        if metric == "euclidean":
            dist = np.sqrt(((refs - q) ** 2).sum(axis=1))
        else:
            dist = np.abs(refs - q).sum(axis=1)
        if self_indices is not None:
            dist = dist.copy()
            dist[self_indices[qi]] = np.inf
        order = np.lexsort((np.arange(refs.shape[0]), dist))
        out[qi] = order[:k]
    return out


def test_points_on_a_line_hand_example():
    pts = np.array([[0.0], [3.0], [4.0]])
    got = k_nearest(pts, 0, k=2, exclude_self=True)
    assert got.tolist() == [1, 2]  # the point at 3, then the point at 4
    # an explicit query vector keeps the coincident point itself
    got2 = k_nearest(pts, np.array([0.0]), k=3)
    assert got2.tolist() == [0, 1, 2]


def test_k_equal_to_all_rows_is_permutation():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(17, 3))
    got = k_nearest(pts, rng.normal(size=3), k=17)
    assert sorted(got.tolist()) == list(range(17))


def test_manhattan_equals_euclidean_order_in_1d():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-5, 5, size=(40, 1))
    q = np.array([0.3])
    e = k_nearest(pts, q, k=10, metric="euclidean")
    m = k_nearest(pts, q, k=10, metric="manhattan")
    assert np.array_equal(e, m)


def test_k_too_large_rejected():
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        k_nearest(pts, np.zeros(2), k=4)


def test_oracle_agreement_random_instances():
    rng = np.random.default_rng(2024)
    for trial in range(20):
        n = int(rng.integers(5, 120))
        d = int(rng.integers(1, 8))
        q = int(rng.integers(1, 30))
        k = int(rng.integers(1, n + 1))
        metric = "euclidean" if trial % 2 == 0 else "manhattan"
        # integer grids force plenty of exact distance ties
        refs = rng.integers(0, 4, size=(n, d)).astype(float)
        queries = rng.integers(0, 4, size=(q, d)).astype(float)
        got = nearest_neighbors(refs, queries, k, metric=metric)
        want = brute_force_neighbors(refs, queries, k, metric)
        assert np.array_equal(got, want), f"trial {trial}"


def test_oracle_agreement_with_self_exclusion():
    rng = np.random.default_rng(7)
    for trial in range(10):
        n = int(rng.integers(6, 60))
        d = int(rng.integers(1, 5))
        refs = rng.integers(0, 3, size=(n, d)).astype(float)
        k = int(rng.integers(1, n))
        self_idx = np.arange(n)
        got = nearest_neighbors(refs, refs, k, self_indices=self_idx)
        want = brute_force_neighbors(refs, refs, k, self_indices=self_idx)
        assert np.array_equal(got, want), f"trial {trial}"


def test_chunked_path_matches_unchunked(monkeypatch):
    rng = np.random.default_rng(11)
    refs = rng.integers(0, 3, size=(150, 6)).astype(float)
    queries = rng.integers(0, 3, size=(70, 6)).astype(float)
    full = nearest_neighbors(refs, queries, 9)
    monkeypatch.setattr(nb, "_CHUNK_CELLS", 512)
    chunked = nearest_neighbors(refs, queries, 9)
    assert np.array_equal(full, chunked)


def test_squared_euclidean_exactness_and_clipping():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(30, 4)) * 1e3
    d2 = squared_euclidean(a, a)
    assert (d2 >= 0).all()
    assert np.abs(np.diag(d2)).max() < 1e-6
    i, j = 4, 17
    direct = ((a[i] - a[j]) ** 2).sum()
    assert d2[j, i] == pytest.approx(direct, rel=1e-9)


def test_manhattan_matches_direct():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(12, 5))
    b = rng.normal(size=(7, 5))
    d = manhattan(b, a)
    assert d.shape == (7, 12)
    assert d[3, 8] == pytest.approx(np.abs(a[8] - b[3]).sum(), rel=1e-12)
