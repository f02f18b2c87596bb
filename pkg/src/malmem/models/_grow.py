"""Level-order construction of axis-aligned decision trees.

Trees are grown breadth-first so each level is a handful of vectorized
passes instead of per-node Python recursion.  For every feature in play at
a level, rows are taken in presorted feature order, stably regrouped by
owning node, and candidate splits are scored from segmented running sums of
the per-row statistics (one-hot class counts for impurity splits, gradient
pairs for boosted regression trees).  Row routing and child bookkeeping are
likewise vectorized across all nodes of a level, and the per-feature order
arrays are compacted as rows retire so deep levels stay cheap.

Repeated rows can be expressed as integer ``row_weights`` instead of
physical duplicates; statistics, row counts, and leaf payloads all scale by
the weight, which is exactly equivalent to duplicating the rows (bootstrap
resamples use this to share one presort across a whole forest).

Split selection is deterministic: within a node, the best score wins; score
ties go to the lower feature index, then to the lower threshold (the first
qualifying position in sorted order).  Thresholds are midpoints between
consecutive distinct values, nudged down to the left value whenever the
midpoint rounds up to the right value.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class TreeArrays:
    """Flat node-array representation of a fitted tree.

    ``feature`` is -1 at leaves.  ``value`` holds one payload row per node
    (class counts or leaf weight); only leaf payloads are meaningful.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        pending = np.flatnonzero(self.feature[node] >= 0)
        while pending.size:
            nid = node[pending]
            go_left = X[pending, self.feature[nid]] <= self.threshold[nid]
            node[pending] = np.where(go_left, self.left[nid], self.right[nid])
            pending = pending[self.feature[node[pending]] >= 0]
        return node

    def depth(self) -> int:
        """Maximum root-to-leaf edge count."""
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for nid in range(self.n_nodes):
            if self.feature[nid] >= 0:
                depths[self.left[nid]] = depths[nid] + 1
                depths[self.right[nid]] = depths[nid] + 1
        return int(depths.max())


def midpoint_threshold(low, high):
    """Midpoint of two consecutive sorted values, kept strictly below ``high``."""
    mid = (np.asarray(low) + np.asarray(high)) * 0.5
    return np.where(mid < high, mid, low)


class _NodeStore:
    """Growable arrays of per-node fields."""

    def __init__(self, stat_width: int, capacity: int = 64):
        self.n = 0
        self.feature = np.full(capacity, -1, dtype=np.int64)
        self.threshold = np.full(capacity, np.nan)
        self.left = np.full(capacity, -1, dtype=np.int64)
        self.right = np.full(capacity, -1, dtype=np.int64)
        self.total = np.zeros((capacity, stat_width))
        self.rows = np.zeros(capacity)

    def _ensure(self, extra: int):
        need = self.n + extra
        cap = self.feature.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("feature", "left", "right"):
            grown = np.full(cap, -1, dtype=np.int64)
            grown[: self.n] = getattr(self, name)[: self.n]
            setattr(self, name, grown)
        threshold = np.full(cap, np.nan)
        threshold[: self.n] = self.threshold[: self.n]
        self.threshold = threshold
        rows = np.zeros(cap)
        rows[: self.n] = self.rows[: self.n]
        self.rows = rows
        total = np.zeros((cap, self.total.shape[1]))
        total[: self.n] = self.total[: self.n]
        self.total = total

    def add_block(self, totals: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Append a block of nodes, returning their new global ids."""
        count = totals.shape[0]
        self._ensure(count)
        ids = np.arange(self.n, self.n + count, dtype=np.int64)
        self.total[ids] = totals
        self.rows[ids] = rows
        self.n += count
        return ids


def grow_tree(
    X: np.ndarray,
    stats: np.ndarray,
    *,
    score_positions: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    can_split_node: Callable[[np.ndarray, np.ndarray], np.ndarray],
    leaf_payload: Callable[[np.ndarray], np.ndarray],
    max_depth: int | None = None,
    min_score: float = 0.0,
    candidate_features: Callable[[], np.ndarray] | None = None,
    presorted: np.ndarray | None = None,
    row_weights: np.ndarray | None = None,
) -> TreeArrays:
    """Grow one tree over ``X`` given per-row split statistics.

    Args:
        X: (n, d) training matrix.
        stats: (n, s) per-row statistics; a node's statistics are the
            weighted sum over its rows, and splits are scored from
            left/right partial sums.
        score_positions: maps (left, right, node_total) stat blocks, one row
            per candidate boundary, to a score array; positions that violate
            the strategy's own constraints must return -inf.
        can_split_node: vectorized node-level pre-check mapping an (m, s)
            block of node totals and an (m,) row-count vector to a bool mask.
        leaf_payload: maps an (m, s) block of node totals to (m, v) payloads.
        max_depth: maximum number of split levels (None for unbounded).
        min_score: a node only splits when its best score exceeds this
            (-inf accepts any valid boundary).
        candidate_features: optional per-node draw of candidate feature
            indices; called once per splittable node in node-id order.
        presorted: optional (n, d) precomputed argsort of X along axis 0
            (it may be shared across trees; it is never modified).
        row_weights: optional (n,) non-negative multiplicities; 0 drops a
            row entirely, k > 0 behaves exactly like k duplicates.

    Returns:
        TreeArrays with payloads filled for every node (only leaf payloads
        are meaningful to prediction).
    """
    X = np.asfortranarray(X, dtype=np.float64)
    n, d = X.shape
    stats = np.ascontiguousarray(stats, dtype=np.float64)
    if stats.shape[0] != n:
        raise ValueError("stats must align with X rows")
    order = presorted if presorted is not None else np.argsort(X, axis=0, kind="stable")

    if row_weights is None:
        weights = np.ones(n)
        live_mask = np.ones(n, dtype=bool)
    else:
        weights = np.asarray(row_weights, dtype=np.float64)
        if weights.shape != (n,) or (weights < 0).any():
            raise ValueError("row_weights must be (n,) and non-negative")
        live_mask = weights > 0
    wstats = stats * weights[:, None]
    s_width = stats.shape[1]

    # Per-feature row orders, kept pruned to live rows.
    orders = []
    for f in range(d):
        col = np.ascontiguousarray(order[:, f])
        orders.append(col[live_mask[col]] if not live_mask.all() else col)

    store = _NodeStore(s_width)
    active = store.add_block(wstats[live_mask].sum(axis=0)[None, :], np.array([weights.sum()]))
    # row_node holds *level-local* node slots, -1 for retired rows.
    row_node = np.where(live_mask, 0, -1).astype(np.int64)
    live_count = int(live_mask.sum())
    depth = 0

    while active.size:
        n_active = active.size
        act_total = store.total[active]
        act_rows = store.rows[active]
        if max_depth is not None and depth >= max_depth:
            splittable = np.zeros(n_active, dtype=bool)
        else:
            splittable = (act_rows >= 2) & can_split_node(act_total, act_rows)

        best_score = np.full(n_active, -np.inf)
        best_feat = np.full(n_active, -1, dtype=np.int64)
        best_thr = np.zeros(n_active)

        if splittable.any():
            if candidate_features is None:
                use = None
                features_in_play = range(d)
                full_scan = bool(splittable.all())
            else:
                use = np.zeros((n_active, d), dtype=bool)
                for slot in np.flatnonzero(splittable):
                    use[slot, candidate_features()] = True
                features_in_play = np.flatnonzero(use.any(axis=0))
                full_scan = False

            for f in features_in_play:
                of = orders[f]
                slot_of = row_node[of]
                keep = slot_of >= 0
                if use is not None:
                    keep[keep] = use[slot_of[keep], f]
                elif not full_scan:
                    keep[keep] = splittable[slot_of[keep]]
                rows = of[keep]
                m = rows.size
                if m < 2:
                    continue
                slot = slot_of[keep]
                regroup = np.argsort(slot, kind="stable")
                rows = rows[regroup]
                slot = slot[regroup]
                vals = X[rows, f]
                running = np.cumsum(wstats[rows], axis=0)

                same_next = np.empty(m, dtype=bool)
                same_next[:-1] = slot[1:] == slot[:-1]
                same_next[-1] = False
                is_first = np.empty(m, dtype=bool)
                is_first[0] = True
                is_first[1:] = ~same_next[:-1]
                seg_first = np.flatnonzero(is_first)
                seg_slot = slot[seg_first]

                base_by_slot = np.zeros((n_active, s_width))
                base_by_slot[seg_slot[1:]] = running[seg_first[1:] - 1]
                left = running - base_by_slot[slot]
                total = act_total[slot]
                right = total - left

                # A boundary position p proposes splitting between vals[p]
                # and vals[p+1]; p must not be the last row of its segment
                # and the two values must differ.
                increasing = np.empty(m, dtype=bool)
                increasing[:-1] = vals[:-1] < vals[1:]
                increasing[-1] = False

                scores = score_positions(left, right, total)
                scores[~(same_next & increasing)] = -np.inf

                seg_max = np.maximum.reduceat(scores, seg_first)
                improved = seg_max > best_score[seg_slot]
                if not improved.any():
                    continue
                max_by_slot = np.full(n_active, -np.inf)
                max_by_slot[seg_slot] = seg_max
                at_max = np.where(scores == max_by_slot[slot], np.arange(m), m)
                first_at_max = np.minimum.reduceat(at_max, seg_first)

                win = np.flatnonzero(improved)
                p = first_at_max[win]
                ids = seg_slot[win]
                best_score[ids] = seg_max[win]
                best_feat[ids] = f
                best_thr[ids] = midpoint_threshold(vals[p], vals[p + 1])

        # Route every live row at once: rows of leaf slots retire, rows of
        # split slots move to the child slots of the next level.
        splits = np.flatnonzero((best_feat >= 0) & (best_score > min_score))
        live = np.flatnonzero(row_node >= 0)
        if splits.size == 0:
            row_node[live] = -1
            active = np.empty(0, dtype=np.int64)
            break

        child_base = np.full(n_active, -1, dtype=np.int64)
        child_base[splits] = 2 * np.arange(splits.size)

        slot_live = row_node[live]
        base_live = child_base[slot_live]
        routed = base_live >= 0
        routed_rows = live[routed]
        routed_slot = slot_live[routed]
        go_left = X[routed_rows, best_feat[routed_slot]] <= best_thr[routed_slot]
        new_slot = np.full(live.size, -1, dtype=np.int64)
        new_slot[routed] = base_live[routed] + (~go_left)
        row_node[live] = new_slot

        n_children = 2 * splits.size
        child_slots = new_slot[routed]
        child_rows = np.bincount(child_slots, weights=weights[routed_rows], minlength=n_children)
        child_totals = np.empty((n_children, s_width))
        for col in range(s_width):
            child_totals[:, col] = np.bincount(
                child_slots, weights=wstats[routed_rows, col], minlength=n_children
            )

        child_ids = store.add_block(child_totals, child_rows)
        parents = active[splits]
        store.feature[parents] = best_feat[splits]
        store.threshold[parents] = best_thr[splits]
        store.left[parents] = child_ids[0::2]
        store.right[parents] = child_ids[1::2]
        active = child_ids
        depth += 1

        new_live = int(routed_rows.size)
        if new_live < live_count - (live_count >> 3):
            orders = [o[row_node[o] >= 0] for o in orders]
            live_count = new_live

    count = store.n
    return TreeArrays(
        feature=store.feature[:count].copy(),
        threshold=store.threshold[:count].copy(),
        left=store.left[:count].copy(),
        right=store.right[:count].copy(),
        value=leaf_payload(store.total[:count]),
    )


#: Bin budget of the histogram grower; features with fewer distinct values
#: are binned exactly, so splits on such features match the exact grower.
MAX_BINS = 256


def bin_columns(X: np.ndarray, max_bins: int = MAX_BINS) -> tuple[np.ndarray, list[np.ndarray]]:
    """Quantile-bin every column of ``X`` for histogram-based tree growth.

    Each feature gets at most ``max_bins - 1`` ascending boundary values,
    every one a midpoint between two consecutive distinct feature values, so
    a boundary is always a usable split threshold.  Features with at most
    ``max_bins`` distinct values keep every distinct-value boundary and are
    therefore binned losslessly.

    Returns:
        codes: (d, n) uint8 array; ``codes[f, i] == j`` means row i falls
            at or below boundary j of feature f (and above boundary j - 1).
        edges: per-feature ascending boundary arrays.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not 2 <= max_bins <= 256:
        raise ValueError(f"max_bins must be in [2, 256], got {max_bins}")
    codes = np.empty((d, n), dtype=np.uint8)
    edges: list[np.ndarray] = []
    for f in range(d):
        col = X[:, f]
        srt = np.sort(col)
        distinct = srt[np.r_[True, srt[1:] > srt[:-1]]]
        if distinct.size <= max_bins:
            lows, highs = distinct[:-1], distinct[1:]
        else:
            pos = (np.arange(1, max_bins) * n) // max_bins
            lows, highs = srt[pos - 1], srt[pos]
            inside = lows < highs
            lows, highs = np.unique(lows[inside]), np.unique(highs[inside])
        e = np.asarray(midpoint_threshold(lows, highs), dtype=np.float64)
        codes[f] = np.searchsorted(e, col, side="left")
        edges.append(e)
    return codes, edges


def grow_tree_hist(
    codes: np.ndarray,
    edges: list[np.ndarray],
    stats: np.ndarray,
    *,
    score_positions: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    can_split_node: Callable[[np.ndarray, np.ndarray], np.ndarray],
    leaf_payload: Callable[[np.ndarray], np.ndarray],
    max_depth: int | None = None,
    min_score: float = 0.0,
    row_weights: np.ndarray | None = None,
) -> TreeArrays:
    """Grow one tree from pre-binned features (see :func:`bin_columns`).

    Candidate thresholds are the bin boundaries, so per node and feature the
    whole scoring pass runs on an aggregated histogram instead of sorted
    rows; one weighted bincount per statistic covers all nodes of a level at
    once.  Interface and tie-breaking match :func:`grow_tree` (best score,
    then lower feature index, then lower threshold).  Intended for
    depth-bounded trees: per level it allocates histograms proportional to
    (number of nodes) x 256, which is wasteful for purity-grown trees.
    """
    d, n = codes.shape
    stats = np.ascontiguousarray(stats, dtype=np.float64)
    if stats.shape[0] != n:
        raise ValueError("stats must align with the binned rows")
    if row_weights is None:
        weights = np.ones(n)
        row_node = np.zeros(n, dtype=np.int64)
    else:
        weights = np.asarray(row_weights, dtype=np.float64)
        if weights.shape != (n,) or (weights < 0).any():
            raise ValueError("row_weights must be (n,) and non-negative")
        row_node = np.where(weights > 0, 0, -1).astype(np.int64)
    wstats = stats * weights[:, None]
    s_width = stats.shape[1]
    n_bins = max(e.size for e in edges) + 1

    store = _NodeStore(s_width)
    live0 = row_node >= 0
    active = store.add_block(wstats[live0].sum(axis=0)[None, :], np.array([weights[live0].sum()]))
    depth = 0

    while active.size:
        n_active = active.size
        act_total = store.total[active]
        act_rows = store.rows[active]
        if max_depth is not None and depth >= max_depth:
            splittable = np.zeros(n_active, dtype=bool)
        else:
            splittable = (act_rows >= 2) & can_split_node(act_total, act_rows)

        best_score = np.full(n_active, -np.inf)
        best_feat = np.full(n_active, -1, dtype=np.int64)
        best_bound = np.zeros(n_active, dtype=np.int64)
        best_thr = np.zeros(n_active)

        live = np.flatnonzero(row_node >= 0)
        if splittable.any():
            slot_live = row_node[live].astype(np.intp)
            keybase = slot_live * n_bins
            w_live = weights[live]
            ws_live = wstats[live]
            hist_len = n_active * n_bins
            node_ax = np.arange(n_active)
            for f in range(d):
                nb = edges[f].size
                if nb == 0:
                    continue
                key = keybase + codes[f, live]
                occupancy = np.bincount(key, weights=w_live, minlength=hist_len)
                occupancy = occupancy.reshape(n_active, n_bins)
                rows_left = occupancy[:, :nb].cumsum(axis=1)
                rows_right = act_rows[:, None] - rows_left
                hist = np.empty((n_active, nb, s_width))
                for col in range(s_width):
                    acc = np.bincount(key, weights=ws_live[:, col], minlength=hist_len)
                    hist[:, :, col] = acc.reshape(n_active, n_bins)[:, :nb].cumsum(axis=1)
                left = hist.reshape(-1, s_width)
                total = np.repeat(act_total, nb, axis=0)
                right = total - left
                scores = score_positions(left, right, total).reshape(n_active, nb)
                invalid = (rows_left <= 0) | (rows_right <= 0) | ~splittable[:, None]
                scores[invalid] = -np.inf
                fbest = scores.argmax(axis=1)
                fscore = scores[node_ax, fbest]
                better = fscore > best_score
                if better.any():
                    best_score[better] = fscore[better]
                    best_feat[better] = f
                    best_bound[better] = fbest[better]
                    best_thr[better] = edges[f][fbest[better]]

        splits = np.flatnonzero((best_feat >= 0) & (best_score > min_score))
        if splits.size == 0:
            row_node[live] = -1
            break

        child_base = np.full(n_active, -1, dtype=np.int64)
        child_base[splits] = 2 * np.arange(splits.size)
        slot_live = row_node[live]
        base_live = child_base[slot_live]
        routed = base_live >= 0
        routed_rows = live[routed]
        routed_slot = slot_live[routed]
        go_left = codes[best_feat[routed_slot], routed_rows] <= best_bound[routed_slot]
        new_slot = np.full(live.size, -1, dtype=np.int64)
        new_slot[routed] = base_live[routed] + (~go_left)
        row_node[live] = new_slot

        n_children = 2 * splits.size
        child_slots = new_slot[routed]
        child_rows = np.bincount(child_slots, weights=weights[routed_rows], minlength=n_children)
        child_totals = np.empty((n_children, s_width))
        for col in range(s_width):
            child_totals[:, col] = np.bincount(
                child_slots, weights=wstats[routed_rows, col], minlength=n_children
            )

        child_ids = store.add_block(child_totals, child_rows)
        parents = active[splits]
        store.feature[parents] = best_feat[splits]
        store.threshold[parents] = best_thr[splits]
        store.left[parents] = child_ids[0::2]
        store.right[parents] = child_ids[1::2]
        active = child_ids
        depth += 1

    count = store.n
    return TreeArrays(
        feature=store.feature[:count].copy(),
        threshold=store.threshold[:count].copy(),
        left=store.left[:count].copy(),
        right=store.right[:count].copy(),
        value=leaf_payload(store.total[:count]),
    )
