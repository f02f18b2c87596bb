"""Class-rebalancing of an encoded training set.

Five techniques: random undersampling, edited-nearest-neighbor cleaning
(single pass), its iterated AllKNN variant, NearMiss (versions 1 to 3), and
ADASYN oversampling.  All operate on an (n, d) float matrix plus an (n,)
integer label vector and return row-aligned outputs with a per-row flag for
synthetic rows.

Undersamplers reduce every *target* class to the largest count found among
the non-target classes (or to the overall minimum count when every class is
targeted).  Kept rows stay in their original order, which keeps results
reproducible and makes the no-op case literally the identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neighbors import nearest_neighbors
from .rng import STREAM_ADASYN, STREAM_UNDERSAMPLE, substream

TECHNIQUES = ("none", "random", "enn", "allknn", "nearmiss", "adasyn")

_DIST_CHUNK_CELLS = 2 ** 24


@dataclass(frozen=True)
class UndersampleParams:
    """Shared knobs for the four undersampling techniques.

    ``target_classes`` is the set of class codes to shrink; None means the
    single largest class.  ``near_miss_version`` only matters for NearMiss.
    """

    k: int = 3
    near_miss_version: int = 1
    target_classes: frozenset[int] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.near_miss_version not in (1, 2, 3):
            raise ValueError(f"near_miss_version must be 1, 2, or 3, got {self.near_miss_version}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class AdasynParams:
    """ADASYN oversampling knobs.

    ``beta`` scales how far each minority class is topped up toward the
    majority count (1.0 means full balance).  ``target_classes`` defaults to
    every non-majority class.
    """

    k: int = 5
    beta: float = 1.0
    target_classes: frozenset[int] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class ResampleOutput:
    """Resampled training set; ``synthetic`` marks generated rows."""

    features: np.ndarray
    labels: np.ndarray
    synthetic: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape[0] != n or self.synthetic.shape[0] != n:
            raise ValueError("resample output arrays are not row-aligned")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


def _check_inputs(features, labels) -> tuple[np.ndarray, np.ndarray]:
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels, dtype=np.int64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError(f"features must be a non-empty 2-D matrix, got shape {feats.shape}")
    if labs.shape != (feats.shape[0],):
        raise ValueError("labels must align with feature rows")
    if labs.min() < 0:
        raise ValueError("labels must be non-negative class codes")
    return feats, labs


def majority_class(labels: np.ndarray) -> int:
    """Largest class code by count; ties go to the lowest code."""
    counts = np.bincount(labels)
    return int(np.argmax(counts))


def resolve_target_classes(labels: np.ndarray, spec) -> frozenset[int]:
    """Resolve a target-class spec into a concrete set of codes.

    ``spec`` may be None (majority class only), a mode string ('majority',
    'not_minority', 'all'), or an iterable of class codes.
    """
    counts = np.bincount(np.asarray(labels, dtype=np.int64))
    present = np.flatnonzero(counts)
    if spec is None or spec == "majority":
        return frozenset({majority_class(labels)})
    if spec == "not_minority":
        minority = int(present[np.argmin(counts[present])])
        return frozenset(int(c) for c in present if c != minority)
    if spec == "all":
        return frozenset(int(c) for c in present)
    targets = frozenset(int(c) for c in spec)
    if not targets:
        raise ValueError("target_classes must not be empty")
    missing = [c for c in targets if c >= counts.size or counts[c] == 0]
    if missing:
        raise ValueError(f"target classes {missing} are not present in the labels")
    return targets


def _reduction_target(counts: np.ndarray, targets: frozenset[int]) -> int:
    present = np.flatnonzero(counts)
    others = [c for c in present if c not in targets]
    if others:
        return int(counts[others].max())
    return int(counts[present].min())


def _passthrough(feats: np.ndarray, labs: np.ndarray) -> ResampleOutput:
    return ResampleOutput(
        features=feats.copy(),
        labels=labs.copy(),
        synthetic=np.zeros(labs.shape[0], dtype=bool),
    )


def _keep(feats: np.ndarray, labs: np.ndarray, kept_idx: np.ndarray) -> ResampleOutput:
    kept = np.sort(np.asarray(kept_idx, dtype=np.int64))
    return ResampleOutput(
        features=feats[kept],
        labels=labs[kept],
        synthetic=np.zeros(kept.size, dtype=bool),
    )


def random_undersample(features, labels, params: UndersampleParams = UndersampleParams()) -> ResampleOutput:
    """Drop uniformly sampled rows from each target class down to the target count."""
    feats, labs = _check_inputs(features, labels)
    counts = np.bincount(labs)
    targets = resolve_target_classes(labs, params.target_classes)
    goal = _reduction_target(counts, targets)

    kept = [np.flatnonzero(~np.isin(labs, list(targets)))]
    for code in sorted(targets):
        rows = np.flatnonzero(labs == code)
        if rows.size < goal:
            raise ValueError(
                f"target class {code} has {rows.size} rows, fewer than the target count {goal}"
            )
        if rows.size == goal:
            kept.append(rows)
            continue
        rng = substream(params.seed, STREAM_UNDERSAMPLE, code)
        kept.append(rng.choice(rows, size=goal, replace=False))
    return _keep(feats, labs, np.concatenate(kept))


def _enn_removals(feats, labs, survivor_idx, k, targets) -> np.ndarray:
    """Original-row indices that a single ENN pass at ``k`` would remove."""
    sub_feats = feats[survivor_idx]
    sub_labs = labs[survivor_idx]
    target_mask = np.isin(sub_labs, list(targets))
    query_pos = np.flatnonzero(target_mask)
    if query_pos.size == 0 or survivor_idx.size <= k:
        return np.empty(0, dtype=np.int64)
    neigh = nearest_neighbors(
        sub_feats, sub_feats[query_pos], k, metric="euclidean", self_indices=query_pos
    )
    neigh_labels = sub_labs[neigh]
    n_classes = int(labs.max()) + 1
    votes = np.zeros((query_pos.size, n_classes), dtype=np.int64)
    rows = np.repeat(np.arange(query_pos.size), k)
    np.add.at(votes, (rows, neigh_labels.ravel()), 1)
    winner = votes.argmax(axis=1)
    disagree = winner != sub_labs[query_pos]
    return survivor_idx[query_pos[disagree]]


def edited_nearest_neighbor(features, labels, params: UndersampleParams = UndersampleParams()) -> ResampleOutput:
    """Remove target-class rows whose label loses the vote of their k nearest neighbors.

    Neighbors are searched over all rows (self excluded, Euclidean).  Vote
    ties resolve to the lowest class code.  A single pass: every removal is
    decided against the original data.
    """
    feats, labs = _check_inputs(features, labels)
    if feats.shape[0] <= params.k:
        raise ValueError(f"need more than k={params.k} rows, got {feats.shape[0]}")
    targets = resolve_target_classes(labs, params.target_classes)
    removals = _enn_removals(feats, labs, np.arange(labs.size), params.k, targets)
    keep_mask = np.ones(labs.size, dtype=bool)
    keep_mask[removals] = False
    return _keep(feats, labs, np.flatnonzero(keep_mask))


def all_knn(features, labels, params: UndersampleParams = UndersampleParams()) -> ResampleOutput:
    """Iterated ENN: apply passes with k' = 1..k, each on the survivors so far.

    Iteration stops before any pass that would delete the last remaining
    rows of a target class.
    """
    feats, labs = _check_inputs(features, labels)
    if feats.shape[0] <= params.k:
        raise ValueError(f"need more than k={params.k} rows, got {feats.shape[0]}")
    targets = resolve_target_classes(labs, params.target_classes)

    survivors = np.arange(labs.size, dtype=np.int64)
    for k_pass in range(1, params.k + 1):
        if survivors.size <= k_pass:
            break
        removals = _enn_removals(feats, labs, survivors, k_pass, targets)
        if removals.size == 0:
            continue
        removed_counts = np.bincount(labs[removals], minlength=int(labs.max()) + 1)
        surviving_counts = np.bincount(labs[survivors], minlength=int(labs.max()) + 1)
        would_empty = any(
            surviving_counts[code] - removed_counts[code] <= 0 for code in sorted(targets)
        )
        if would_empty:
            break
        keep_mask = np.ones(labs.size, dtype=bool)
        keep_mask[removals] = False
        survivors = survivors[keep_mask[survivors]]
    return _keep(feats, labs, survivors)


def _chunked_mean_extreme_dist(queries, refs, k, largest) -> np.ndarray:
    """Mean Euclidean distance from each query to its k nearest (or farthest) refs."""
    k = min(k, refs.shape[0])
    out = np.empty(queries.shape[0], dtype=np.float64)
    chunk = max(1, min(queries.shape[0], _DIST_CHUNK_CELLS // max(refs.shape[0], 1)))
    for start in range(0, queries.shape[0], chunk):
        stop = min(start + chunk, queries.shape[0])
        d2 = (
            np.einsum("ij,ij->i", queries[start:stop], queries[start:stop])[:, None]
            + np.einsum("ij,ij->i", refs, refs)[None, :]
            - 2.0 * (queries[start:stop] @ refs.T)
        )
        np.maximum(d2, 0.0, out=d2)
        dist = np.sqrt(d2)
        if k >= dist.shape[1]:
            sel = dist
        elif largest:
            sel = np.partition(dist, dist.shape[1] - k, axis=1)[:, -k:]
        else:
            sel = np.partition(dist, k - 1, axis=1)[:, :k]
        out[start:stop] = sel.mean(axis=1)
    return out


def near_miss(features, labels, params: UndersampleParams = UndersampleParams()) -> ResampleOutput:
    """Keep the target-class rows closest (by mean distance) to the other classes.

    Version 1 scores each target row by its mean distance to its k nearest
    non-target rows and keeps the lowest scores.  Version 2 scores against
    the k farthest non-target rows instead.  Version 3 first restricts to
    candidates that are among the k nearest target rows of some non-target
    row, then keeps the candidates with the *largest* version-1 score.
    Score ties resolve to the lower row index.
    """
    feats, labs = _check_inputs(features, labels)
    targets = resolve_target_classes(labs, params.target_classes)
    minority_rows = np.flatnonzero(~np.isin(labs, list(targets)))
    if minority_rows.size == 0:
        raise ValueError("NearMiss needs at least one non-target class to measure distances to")
    counts = np.bincount(labs)
    goal = _reduction_target(counts, targets)
    minority_feats = feats[minority_rows]

    kept = [minority_rows]
    for code in sorted(targets):
        rows = np.flatnonzero(labs == code)
        if rows.size <= goal:
            kept.append(rows)
            continue
        if params.near_miss_version == 3:
            k_stage1 = min(params.k, rows.size)
            neigh = nearest_neighbors(feats[rows], minority_feats, k_stage1, metric="euclidean")
            cand_pos = np.unique(neigh.ravel())
            cand_rows = rows[cand_pos]
            if cand_rows.size <= goal:
                kept.append(cand_rows)
                continue
            scores = _chunked_mean_extreme_dist(
                feats[cand_rows], minority_feats, params.k, largest=False
            )
            order = np.lexsort((np.arange(cand_rows.size), -scores))
            kept.append(cand_rows[order[:goal]])
            continue
        largest = params.near_miss_version == 2
        scores = _chunked_mean_extreme_dist(feats[rows], minority_feats, params.k, largest=largest)
        order = np.lexsort((np.arange(rows.size), scores))
        kept.append(rows[order[:goal]])
    return _keep(feats, labs, np.concatenate(kept))


def adasyn(features, labels, params: AdasynParams = AdasynParams()) -> ResampleOutput:
    """Grow each target class toward the majority count with interpolated rows.

    Each minority row gets a synthesis budget proportional to how much of
    its neighborhood belongs to the majority class (harder rows get more).
    When no neighborhood contains majority rows the budget falls back to
    uniform.  A synthetic row is ``x_i + lam * (x_z - x_i)`` with ``x_z``
    drawn from the row's k nearest same-class rows and ``lam`` uniform on
    [0, 1), so it lies on the segment between the two parents.  Original
    rows are returned first, in their original order, followed by synthetic
    rows grouped by class code.
    """
    feats, labs = _check_inputs(features, labels)
    counts = np.bincount(labs)
    majority = majority_class(labs)
    majority_count = int(counts[majority])
    if params.target_classes is None:
        targets = sorted(int(c) for c in np.flatnonzero(counts) if int(c) != majority)
    else:
        targets = sorted(resolve_target_classes(labs, params.target_classes))
        if majority in targets:
            raise ValueError(f"majority class {majority} cannot be an ADASYN target")

    synth_feats, synth_labels = [], []
    for code in targets:
        rows = np.flatnonzero(labs == code)
        class_count = rows.size
        budget_total = (majority_count - class_count) * params.beta
        if budget_total <= 0:
            continue
        if class_count < 2:
            raise ValueError(f"ADASYN target class {code} needs at least 2 rows, has {class_count}")

        k_all = min(params.k, labs.size - 1)
        neigh_all = nearest_neighbors(feats, feats[rows], k_all, self_indices=rows)
        hardness = (labs[neigh_all] == majority).sum(axis=1).astype(np.float64) / k_all
        total_hardness = hardness.sum()
        if total_hardness > 0:
            per_row = np.rint(hardness / total_hardness * budget_total).astype(np.int64)
        else:
            per_row = np.full(class_count, int(round(budget_total / class_count)), dtype=np.int64)

        k_same = min(params.k, class_count - 1)
        neigh_same = nearest_neighbors(
            feats[rows], feats[rows], k_same, self_indices=np.arange(class_count)
        )
        for pos in range(class_count):
            amount = int(per_row[pos])
            if amount <= 0:
                continue
            rng = substream(params.seed, STREAM_ADASYN, code, int(rows[pos]))
            partners = rng.integers(0, k_same, size=amount)
            lam = rng.random(amount)
            base = feats[rows[pos]]
            partner_feats = feats[rows[neigh_same[pos][partners]]]
            synth_feats.append(base[None, :] + lam[:, None] * (partner_feats - base[None, :]))
            synth_labels.append(np.full(amount, code, dtype=np.int64))

    if not synth_feats:
        return _passthrough(feats, labs)
    new_feats = np.concatenate([feats] + synth_feats, axis=0)
    new_labels = np.concatenate([labs] + synth_labels)
    synthetic = np.zeros(new_labels.size, dtype=bool)
    synthetic[labs.size :] = True
    return ResampleOutput(features=new_feats, labels=new_labels, synthetic=synthetic)


def apply_technique(name: str, features, labels, *, seed: int = 0,
                    undersample: UndersampleParams | None = None,
                    oversample: AdasynParams | None = None) -> ResampleOutput:
    """Dispatch by case-insensitive technique name ('none' is the identity)."""
    key = str(name).strip().lower()
    if key not in TECHNIQUES:
        raise ValueError(f"unknown resampling technique {name!r}, expected one of {TECHNIQUES}")
    feats, labs = _check_inputs(features, labels)
    if key == "none":
        return _passthrough(feats, labs)
    if key == "adasyn":
        params = oversample or AdasynParams(seed=seed)
        return adasyn(feats, labs, params)
    params = undersample or UndersampleParams(seed=seed)
    if key == "random":
        return random_undersample(feats, labs, params)
    if key == "enn":
        return edited_nearest_neighbor(feats, labs, params)
    if key == "allknn":
        return all_knn(feats, labs, params)
    return near_miss(feats, labs, params)
