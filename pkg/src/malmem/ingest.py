"""Dataset loading, label handling, standardization, and stratified splitting.

The expected CSV layout is a table of numeric memory-dump features plus two
label columns: a category string like ``"Ransomware-Shade-ABCDEF"`` (family
and variant joined by dashes, ``"Benign"`` for clean dumps) and a binary
class string (``"Benign"`` / ``"Malware"``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DatasetError
from .rng import STREAM_SPLIT, substream

BENIGN_LABEL = "Benign"

#: Standard deviations below this are treated as zero (constant feature).
CONSTANT_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureTable:
    """Numeric feature matrix plus the raw label columns, row-aligned."""

    features: np.ndarray
    feature_names: tuple[str, ...]
    category_raw: np.ndarray
    class_raw: np.ndarray

    def __post_init__(self):
        feats = self.features
        if feats.ndim != 2 or feats.shape[0] == 0 or feats.shape[1] == 0:
            raise DatasetError(f"feature matrix must be 2-D and non-empty, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise DatasetError("feature matrix contains non-finite values")
        n = feats.shape[0]
        if len(self.feature_names) != feats.shape[1]:
            raise DatasetError("feature_names length does not match feature matrix width")
        if len(self.category_raw) != n or len(self.class_raw) != n:
            raise DatasetError("label columns are not row-aligned with the feature matrix")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray) -> "FeatureTable":
        """Row-subset view of the table (copies the selected rows)."""
        idx = np.asarray(indices)
        return FeatureTable(
            features=self.features[idx],
            feature_names=self.feature_names,
            category_raw=self.category_raw[idx],
            class_raw=self.class_raw[idx],
        )


def load_csv(path, category_column: str = "Category", class_column: str = "Class") -> FeatureTable:
    """Load a feature CSV, validating shape and numeric content.

    Every column other than the two label columns must parse as a finite
    number; the first offending cell is reported with its row and column.
    """
    p = Path(path)
    if not p.is_file():
        raise DatasetError(f"dataset file not found: {p}")
    try:
        frame = pd.read_csv(p)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"dataset file is empty: {p}") from None
    except pd.errors.ParserError as exc:
        raise DatasetError(f"dataset file could not be parsed: {p}: {exc}") from None

    for col in (category_column, class_column):
        if col not in frame.columns:
            raise DatasetError(f"missing required label column {col!r} in {p}")
    if len(frame) == 0:
        raise DatasetError(f"dataset has a header but no data rows: {p}")

    feature_cols = [c for c in frame.columns if c not in (category_column, class_column)]
    if not feature_cols:
        raise DatasetError(f"dataset has no feature columns besides the label columns: {p}")

    features = np.empty((len(frame), len(feature_cols)), dtype=np.float64)
    for j, col in enumerate(feature_cols):
        numeric = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(numeric)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DatasetError(
                f"non-numeric or non-finite value {frame[col].iloc[i]!r} at data row {i}, column {col!r}"
            )
        features[:, j] = numeric

    labels = {}
    for col in (category_column, class_column):
        raw = frame[col]
        if raw.isna().any() or (raw.astype(str).str.len() == 0).any():
            i = int(np.flatnonzero(raw.isna() | (raw.astype(str).str.len() == 0))[0])
            raise DatasetError(f"empty label at data row {i}, column {col!r}")
        labels[col] = raw.astype(str).to_numpy()

    return FeatureTable(
        features=features,
        feature_names=tuple(feature_cols),
        category_raw=labels[category_column],
        class_raw=labels[class_column],
    )


def normalize_class_label(label: str) -> str:
    """Canonical binary label: strip whitespace, capitalize ("benign" -> "Benign")."""
    return str(label).strip().capitalize()


def binary_labels(table: FeatureTable) -> np.ndarray:
    """Normalized binary class label per row."""
    return np.array([normalize_class_label(s) for s in table.class_raw])


def derive_family_label(category: str) -> str:
    """Family name from a category string: the prefix before the first dash.

    ``"Ransomware-Shade-ABCDEF"`` -> ``"Ransomware"``; ``"Benign"`` stays
    ``"Benign"`` (no dash means the label is already the family).
    """
    text = str(category).strip()
    if not text:
        raise ValueError("cannot derive a family from an empty category label")
    return text.split("-", 1)[0]


def family_labels(table: FeatureTable) -> np.ndarray:
    """Family label per row, derived from the category column."""
    return np.array([derive_family_label(s) for s in table.category_raw])


def is_malicious(table: FeatureTable) -> np.ndarray:
    """Boolean mask of rows whose binary class is not benign."""
    return binary_labels(table) != BENIGN_LABEL


def family_distribution(table: FeatureTable) -> dict[str, int]:
    """Row count per family over the whole table."""
    names, counts = np.unique(family_labels(table), return_counts=True)
    return {str(name): int(count) for name, count in zip(names, counts)}


def malicious_family_share(table: FeatureTable) -> dict[str, float]:
    """Share of each family among malicious rows only; empty if none are malicious."""
    fams = family_labels(table)[is_malicious(table)]
    if fams.size == 0:
        return {}
    names, counts = np.unique(fams, return_counts=True)
    total = counts.sum()
    return {str(name): float(count / total) for name, count in zip(names, counts)}


@dataclass(frozen=True)
class LabelCodec:
    """Bijection between label strings and dense integer codes.

    Classes are stored sorted, so codes are assigned lexicographically and
    the same label set always yields the same codec.
    """

    classes: tuple[str, ...]

    def __post_init__(self):
        if len(self.classes) == 0:
            raise ValueError("codec needs at least one class")
        if list(self.classes) != sorted(set(self.classes)):
            raise ValueError("codec classes must be sorted and unique")

    @classmethod
    def from_labels(cls, labels) -> "LabelCodec":
        return cls(classes=tuple(sorted(set(str(s) for s in labels))))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def code_of(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise ValueError(f"unknown label {name!r}, known: {list(self.classes)}") from None

    def encode(self, labels) -> np.ndarray:
        arr = np.asarray(labels, dtype=str)
        table = np.array(self.classes)
        codes = np.searchsorted(table, arr)
        codes_clipped = np.minimum(codes, len(table) - 1)
        bad = table[codes_clipped] != arr
        if bad.any():
            unknown = arr[bad][0]
            raise ValueError(f"unknown label {unknown!r}, known: {list(self.classes)}")
        return codes_clipped.astype(np.int64)

    def decode(self, codes) -> np.ndarray:
        arr = np.asarray(codes, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.n_classes):
            raise ValueError(f"codes out of range for {self.n_classes} classes")
        return np.array(self.classes)[arr]


def encode_labels(labels, codec: LabelCodec) -> np.ndarray:
    return codec.encode(labels)


@dataclass(frozen=True)
class StandardizationParams:
    """Per-feature z-score parameters fitted on a training partition.

    ``std`` is the population standard deviation (denominator n).  Features
    flagged ``constant`` map to exactly zero when applied.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray
    feature_names: tuple[str, ...] | None = None


def fit_standardizer(train) -> StandardizationParams:
    """Fit z-score parameters on a FeatureTable or a plain (n, d) matrix."""
    if isinstance(train, FeatureTable):
        matrix = train.features
        names = train.feature_names
    else:
        matrix = np.asarray(train, dtype=np.float64)
        names = None
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError(f"need a non-empty 2-D matrix to fit, got shape {matrix.shape}")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    constant = std < CONSTANT_STD_FLOOR
    return StandardizationParams(mean=mean, std=std, constant=constant, feature_names=names)


def apply_standardizer(params: StandardizationParams, data):
    """Standardize a FeatureTable (returns a new table) or a matrix (returns a matrix)."""
    if isinstance(data, FeatureTable):
        transformed = apply_standardizer(params, data.features)
        return FeatureTable(
            features=transformed,
            feature_names=data.feature_names,
            category_raw=data.category_raw,
            class_raw=data.class_raw,
        )
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != params.mean.shape[0]:
        raise ValueError(
            f"matrix width {matrix.shape[1] if matrix.ndim == 2 else 'n/a'} does not match "
            f"the {params.mean.shape[0]} fitted features"
        )
    safe_std = np.where(params.constant, 1.0, params.std)
    out = (matrix - params.mean) / safe_std
    out[:, params.constant] = 0.0
    return out


@dataclass(frozen=True)
class SplitSpec:
    """Stratified train/test split parameters."""

    train_fraction: float = 0.8
    seed: int = 0
    stratify_on: str = "class"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.stratify_on not in ("class", "family"):
            raise ValueError(f"stratify_on must be 'class' or 'family', got {self.stratify_on!r}")


def _floor_with_guard(x: float) -> int:
    # Guards against float representation pushing an exact product just
    # below an integer (e.g. a fraction stored as 0.7999999...).
    return int(math.floor(x + 1e-9))


def stratified_split_indices(labels, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic stratified split of row indices.

    The total train size is floor(train_fraction * n).  Per-class train
    counts start at floor(train_fraction * class_count) and the remainder
    is assigned by largest fractional part (ties to the lexicographically
    first class), so per-class proportions are as even as the integers
    allow.  Rows within a class are shuffled by a per-class substream of
    the seed.  Both returned index arrays are sorted ascending.
    """
    labels = np.asarray(labels, dtype=str)
    n = labels.shape[0]
    if n < 2:
        raise ValueError("need at least two rows to split")
    classes, class_ids = np.unique(labels, return_inverse=True)
    stratum_sizes = np.bincount(class_ids, minlength=classes.size)
    if stratum_sizes.min() < 2:
        tiny = classes[int(np.argmin(stratum_sizes))]
        raise ValueError(f"stratum {tiny!r} has fewer than 2 rows and cannot be split")

    total_train = _floor_with_guard(spec.train_fraction * n)
    counts = np.bincount(class_ids, minlength=classes.size)
    quotas = spec.train_fraction * counts
    base = np.array([_floor_with_guard(q) for q in quotas], dtype=np.int64)
    remainder = int(total_train - base.sum())
    if remainder > 0:
        frac = quotas - base
        order = np.lexsort((np.arange(classes.size), -frac))
        base[order[:remainder]] += 1
    base = np.minimum(base, counts)

    train_parts, test_parts = [], []
    for ci in range(classes.size):
        rows = np.flatnonzero(class_ids == ci)
        rng = substream(spec.seed, STREAM_SPLIT, ci)
        perm = rng.permutation(rows)
        take = int(base[ci])
        train_parts.append(perm[:take])
        test_parts.append(perm[take:])
    train_idx = np.sort(np.concatenate(train_parts)).astype(np.int64)
    test_idx = np.sort(np.concatenate(test_parts)).astype(np.int64)
    return train_idx, test_idx


def stratified_split(table: FeatureTable, spec: SplitSpec) -> tuple[FeatureTable, FeatureTable]:
    """Split a table into (train, test) stratified on the configured label."""
    labels = binary_labels(table) if spec.stratify_on == "class" else family_labels(table)
    train_idx, test_idx = stratified_split_indices(labels, spec)
    if train_idx.size == 0 or test_idx.size == 0:
        raise ValueError("split produced an empty partition; adjust train_fraction")
    return table.take(train_idx), table.take(test_idx)
