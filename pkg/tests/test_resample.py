import numpy as np
import pytest

from malmem.resample import (
    TECHNIQUES,
    AdasynParams,
    ResampleOutput,
    UndersampleParams,
    adasyn,
    all_knn,
    apply_technique,
    edited_nearest_neighbor,
    majority_class,
    near_miss,
    random_undersample,
    resolve_target_classes,
)


def _rows_as_set(X):
    return {tuple(row) for row in X}


def _make_counts(rng, counts, spread=4.0):
    """Labeled gaussian blobs, one per class code, in enumeration order."""
    blocks, labels = [], []
    for code, count in enumerate(counts):
        center = np.array([code * spread, -code * spread])
        blocks.append(rng.normal(size=(count, 2)) + center)
        labels.extend([code] * count)
    return np.vstack(blocks), np.array(labels)


# -------------------------------------------------------------- target logic

def test_majority_class_ties_to_lowest_code():
    assert majority_class(np.array([0, 0, 1, 1, 2])) == 0


def test_resolve_target_classes_modes():
    labels = np.array([0] * 10 + [1] * 5 + [2] * 3)
    assert resolve_target_classes(labels, None) == frozenset({0})
    assert resolve_target_classes(labels, "majority") == frozenset({0})
    assert resolve_target_classes(labels, "not_minority") == frozenset({0, 1})
    assert resolve_target_classes(labels, "all") == frozenset({0, 1, 2})
    assert resolve_target_classes(labels, [1, 2]) == frozenset({1, 2})


def test_resolve_target_classes_rejects_absent_code():
    with pytest.raises(ValueError):
        resolve_target_classes(np.array([0, 0, 1]), [3])


# -------------------------------------------------------- random undersample

def test_random_undersample_reduces_to_max_non_target():
    rng = np.random.default_rng(0)
    # counts mirror a four-class table with one dominant class
    X, y = _make_counts(rng, [2343, 761, 789, 792])
    out = random_undersample(X, y, UndersampleParams(target_classes=frozenset({0}), seed=1))
    counts = out.class_counts()
    assert counts == {0: 792, 1: 761, 2: 789, 3: 792}
    # non-target rows untouched, original order preserved
    kept_non_target = out.features[out.labels != 0]
    assert np.array_equal(kept_non_target, X[y != 0])


def test_random_undersample_all_equal_is_identity():
    rng = np.random.default_rng(1)
    X, y = _make_counts(rng, [50, 50, 50])
    out = random_undersample(X, y, UndersampleParams(seed=7))
    assert np.array_equal(out.features, X)
    assert np.array_equal(out.labels, y)
    assert not out.synthetic.any()


def test_random_undersample_deterministic_and_subset():
    rng = np.random.default_rng(2)
    X, y = _make_counts(rng, [120, 40, 30])
    params = UndersampleParams(target_classes=frozenset({0}), seed=3)
    a = random_undersample(X, y, params)
    b = random_undersample(X, y, params)
    assert np.array_equal(a.features, b.features)
    assert a.class_counts()[0] == 40
    assert _rows_as_set(a.features) <= _rows_as_set(X)


def test_random_undersample_rejects_too_small_target():
    rng = np.random.default_rng(3)
    X, y = _make_counts(rng, [10, 40])
    with pytest.raises(ValueError):
        random_undersample(X, y, UndersampleParams(target_classes=frozenset({0}), seed=0))


# ------------------------------------------------------------------ ENN

def test_enn_removes_point_outvoted_by_neighbors():
    # one majority point in the middle of three minority points
    X = np.array([
        [0.0, 0.0],   # majority, surrounded
        [0.1, 0.0], [0.0, 0.1], [0.1, 0.1],   # minority cluster
        [9.0, 9.0], [9.1, 9.0], [9.0, 9.1], [9.1, 9.1],   # majority cluster far away
    ])
    y = np.array([0, 1, 1, 1, 0, 0, 0, 0])
    out = edited_nearest_neighbor(X, y, UndersampleParams(k=3, target_classes=frozenset({0})))
    assert (0.0, 0.0) not in _rows_as_set(out.features)
    assert out.class_counts() == {0: 4, 1: 3}


def test_enn_separated_clusters_no_removals():
    rng = np.random.default_rng(4)
    X, y = _make_counts(rng, [30, 20], spread=60.0)
    out = edited_nearest_neighbor(X, y, UndersampleParams(k=3, target_classes=frozenset({0})))
    assert out.n_rows == 50
    assert np.array_equal(out.features, X)


def test_enn_rejects_k_not_below_rows():
    X = np.zeros((3, 2))
    y = np.array([0, 0, 1])
    with pytest.raises(ValueError):
        edited_nearest_neighbor(X, y, UndersampleParams(k=3))


# ---------------------------------------------------------------- AllKNN

def test_allknn_equals_composed_enn_when_k1_removes_nothing():
    # seed chosen so the k=1 pass keeps everything while k=3 edits rows
    rng = np.random.default_rng(17)
    X, y = _make_counts(rng, [60, 45], spread=3.0)
    targets = frozenset({0})
    assert edited_nearest_neighbor(
        X, y, UndersampleParams(k=1, target_classes=targets)).n_rows == len(y)
    got = all_knn(X, y, UndersampleParams(k=3, target_classes=targets))
    assert got.n_rows < len(y)
    step2 = edited_nearest_neighbor(X, y, UndersampleParams(k=2, target_classes=targets))
    step3 = edited_nearest_neighbor(step2.features, step2.labels,
                                    UndersampleParams(k=3, target_classes=targets))
    assert np.array_equal(got.features, step3.features)
    assert np.array_equal(got.labels, step3.labels)


def test_allknn_homogeneous_neighborhoods_no_removals():
    rng = np.random.default_rng(6)
    X, y = _make_counts(rng, [25, 25], spread=80.0)
    out = all_knn(X, y, UndersampleParams(k=3, target_classes=frozenset({0})))
    assert np.array_equal(out.features, X)


def test_allknn_never_empties_target_class():
    # minority completely engulfed by majority: aggressive editing, but the
    # target class must survive
    rng = np.random.default_rng(7)
    maj = rng.normal(size=(40, 2)) * 3.0
    tgt = rng.normal(size=(6, 2)) * 3.0
    X = np.vstack([maj, tgt])
    y = np.array([0] * 40 + [1] * 6)
    out = all_knn(X, y, UndersampleParams(k=5, target_classes=frozenset({1})))
    assert out.class_counts().get(1, 0) >= 1
    assert out.class_counts()[0] == 40


# --------------------------------------------------------------- NearMiss

def test_nearmiss_v1_hand_example():
    # majority at x=1,2,10; minority at x=0 (twice, so the keep goal is 2);
    # mean distance to the single nearest minority row is 1, 2, 10
    X = np.array([[1.0], [2.0], [10.0], [0.0], [0.0]])
    y = np.array([0, 0, 0, 1, 1])
    out = near_miss(X, y, UndersampleParams(k=1, near_miss_version=1,
                                            target_classes=frozenset({0})))
    kept = sorted(out.features[out.labels == 0][:, 0].tolist())
    assert kept == [1.0, 2.0]


def test_nearmiss_keep_count_equal_majority_is_identity():
    rng = np.random.default_rng(8)
    X, y = _make_counts(rng, [30, 30])
    out = near_miss(X, y, UndersampleParams(k=3, target_classes=frozenset({0})))
    assert np.array_equal(out.features, X)
    assert np.array_equal(out.labels, y)


def test_nearmiss_v1_v2_match_brute_force():
    rng = np.random.default_rng(9)
    for trial in range(8):
        n0 = int(rng.integers(12, 40))
        n1 = int(rng.integers(5, 11))
        X, y = _make_counts(rng, [n0, n1], spread=3.0)
        k = int(rng.integers(1, 5))
        for version in (1, 2):
            out = near_miss(X, y, UndersampleParams(k=k, near_miss_version=version,
                                                    target_classes=frozenset({0})))
            maj_rows = np.flatnonzero(y == 0)
            min_pts = X[y == 1]
            scores = np.empty(maj_rows.size)
            for i, r in enumerate(maj_rows):
                dist = np.sort(np.sqrt(((min_pts - X[r]) ** 2).sum(axis=1)))
                kk = min(k, dist.size)
                scores[i] = dist[:kk].mean() if version == 1 else dist[-kk:].mean()
            order = np.lexsort((maj_rows, scores))
            want = np.sort(maj_rows[order[:n1]])
            got = np.flatnonzero(np.isin(np.arange(len(y)), maj_rows) &
                                 np.isin(np.arange(len(y)),
                                         [r for r in maj_rows
                                          if tuple(X[r]) in _rows_as_set(out.features[out.labels == 0])]))
            assert np.array_equal(np.sort(got), want), f"trial {trial} v{version}"


def test_nearmiss_v3_keeps_at_most_goal_and_subset():
    rng = np.random.default_rng(10)
    X, y = _make_counts(rng, [80, 25], spread=3.0)
    out = near_miss(X, y, UndersampleParams(k=3, near_miss_version=3,
                                            target_classes=frozenset({0})))
    assert out.class_counts()[0] <= 25
    assert out.class_counts()[1] == 25
    assert _rows_as_set(out.features) <= _rows_as_set(X)


def test_nearmiss_deterministic():
    rng = np.random.default_rng(11)
    X, y = _make_counts(rng, [50, 20])
    for version in (1, 2, 3):
        p = UndersampleParams(k=2, near_miss_version=version, target_classes=frozenset({0}))
        a, b = near_miss(X, y, p), near_miss(X, y, p)
        assert np.array_equal(a.features, b.features)


# ----------------------------------------------------------------- ADASYN

def test_adasyn_balanced_class_is_identity():
    rng = np.random.default_rng(12)
    X, y = _make_counts(rng, [40, 40])
    out = adasyn(X, y, AdasynParams(seed=0))
    assert np.array_equal(out.features, X)
    assert not out.synthetic.any()


def test_adasyn_pair_synthetics_on_segment():
    X = np.array([[0.0, 0.0], [1.0, 0.0]] + [[10.0 + i * 0.1, 5.0] for i in range(8)])
    y = np.array([1, 1] + [0] * 8)
    out = adasyn(X, y, AdasynParams(k=1, seed=3))
    synth = out.features[out.synthetic]
    assert synth.shape[0] > 0
    assert np.abs(synth[:, 1]).max() == 0.0
    assert synth[:, 0].min() >= 0.0 and synth[:, 0].max() <= 1.0
    # labels of synthetics are the minority class
    assert (out.labels[out.synthetic] == 1).all()


def test_adasyn_originals_bit_identical_and_counts_near_majority():
    rng = np.random.default_rng(13)
    X, y = _make_counts(rng, [300, 120, 90], spread=2.0)
    out = adasyn(X, y, AdasynParams(seed=5))
    n = len(y)
    assert np.array_equal(out.features[:n], X)
    assert np.array_equal(out.labels[:n], y)
    assert not out.synthetic[:n].any()
    assert out.synthetic[n:].all()
    counts = out.class_counts()
    for code in (1, 2):
        # rint rounding of per-row budgets keeps totals within a whisker
        assert abs(counts[code] - 300) <= 60
    assert counts[0] == 300


def test_adasyn_interior_class_uniform_fallback():
    # minority cluster far from the majority: no majority points among any
    # k neighbors, so every row gets the same budget
    X = np.vstack([
        np.linspace(0, 1, 12)[:, None] @ np.ones((1, 2)) + np.array([50.0, 50.0]),
        np.random.default_rng(14).normal(size=(30, 2)),
    ])
    y = np.array([1] * 12 + [0] * 30)
    out = adasyn(X, y, AdasynParams(k=5, seed=2))
    counts = out.class_counts()
    g = round((30 - 12) / 12)  # uniform per-row budget, beta = 1
    assert counts[1] == 12 + 12 * g


def test_adasyn_deterministic():
    rng = np.random.default_rng(15)
    X, y = _make_counts(rng, [100, 35], spread=1.5)
    a = adasyn(X, y, AdasynParams(seed=9))
    b = adasyn(X, y, AdasynParams(seed=9))
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.synthetic, b.synthetic)


def test_adasyn_rejects_singleton_class():
    X = np.array([[0.0, 0.0], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]])
    y = np.array([1, 0, 0, 0])
    with pytest.raises(ValueError):
        adasyn(X, y, AdasynParams(k=1, seed=0))


def test_adasyn_convex_combination_per_class_box():
    rng = np.random.default_rng(16)
    X, y = _make_counts(rng, [90, 40], spread=2.0)
    out = adasyn(X, y, AdasynParams(seed=4))
    synth = out.features[out.synthetic]
    lo, hi = X[y == 1].min(axis=0), X[y == 1].max(axis=0)
    assert (synth >= lo - 1e-12).all() and (synth <= hi + 1e-12).all()


# ----------------------------------------------------------------- dispatch

def test_apply_technique_none_is_identity():
    rng = np.random.default_rng(17)
    X, y = _make_counts(rng, [20, 10])
    out = apply_technique("none", X, y)
    assert np.array_equal(out.features, X)
    assert np.array_equal(out.labels, y)


def test_apply_technique_case_insensitive_and_unknown():
    rng = np.random.default_rng(18)
    X, y = _make_counts(rng, [30, 15])
    out = apply_technique("Random", X, y,
                          undersample=UndersampleParams(target_classes=frozenset({0}), seed=0))
    assert out.class_counts() == {0: 15, 1: 15}
    with pytest.raises(ValueError):
        apply_technique("smote", X, y)


def test_all_listed_techniques_dispatch():
    rng = np.random.default_rng(19)
    X, y = _make_counts(rng, [40, 18], spread=5.0)
    for name in TECHNIQUES:
        out = apply_technique(
            name, X, y,
            undersample=UndersampleParams(k=2, target_classes=frozenset({0}), seed=1),
            oversample=AdasynParams(k=3, seed=1),
        )
        assert isinstance(out, ResampleOutput)
        assert out.n_rows > 0
