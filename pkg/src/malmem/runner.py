"""End-to-end experiment orchestration.

A run is: load the CSV, derive binary or family labels, stratified
80/20 split, z-score standardization, optional training-set rebalancing,
fit one of the four models, evaluate on the held-out partition, and write
report.json, confusion.csv, and a confusion heatmap PNG into a fresh
run directory.

Two protocols are supported.  ``leak_free`` fits the standardizer on the
training partition only and rebalances only the training partition.
``resample_before_split`` standardizes and rebalances the full table
before splitting, which leaks resampling information into the held-out
partition; it exists to reproduce results measured that way and is
labeled in every report it produces.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import ConfigError, SchemaMismatchError
from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    confusion,
    confusion_to_csv,
    malicious_leakage,
    metrics_from_confusion,
    render_report,
)
from .ingest import (
    BENIGN_LABEL,
    FeatureTable,
    LabelCodec,
    SplitSpec,
    StandardizationParams,
    apply_standardizer,
    binary_labels,
    family_distribution,
    family_labels,
    fit_standardizer,
    is_malicious,
    load_csv,
    malicious_family_share,
    stratified_split_indices,
)
from .models import (
    ForestParams,
    GbtParams,
    KnnParams,
    MlpParams,
    fit_forest,
    fit_gbt,
    fit_knn,
    fit_mlp,
)
from .persist import save_model
from .plots import save_confusion_heatmap, save_suite_summary
from .resample import (
    AdasynParams,
    TECHNIQUES,
    UndersampleParams,
    apply_technique,
    resolve_target_classes,
)

MODELS = ("rf", "mlp", "knn", "xgb")
TASKS = ("binary", "multiclass")
PROTOCOLS = ("leak_free", "resample_before_split")

SUMMARY_HEADER = "model,technique,accuracy,precision,recall,f1"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: dataset, task, model, rebalancing, protocol, seed."""

    dataset: str
    task: str = "multiclass"
    model: str = "rf"
    resample: str = "none"
    protocol: str = "leak_free"
    seed: int = 0
    train_fraction: float = 0.8
    category_column: str = "Category"
    class_column: str = "Class"
    out_dir: str = "runs"
    model_params: dict = field(default_factory=dict)
    resample_params: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if not self.dataset:
            raise ConfigError("no dataset given (flag --dataset, config key 'dataset', or MALMEM_DATA)")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        technique = str(self.resample).lower()
        if technique not in TECHNIQUES:
            raise ConfigError(f"resample must be one of {TECHNIQUES}, got {self.resample!r}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.task == "binary" and technique != "none":
            raise ConfigError(
                "the binary task runs on the naturally balanced data; "
                "rebalancing is only valid for the multiclass task"
            )
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        return self

    def to_dict(self) -> dict:
        return {
            "dataset": str(self.dataset),
            "task": self.task,
            "model": self.model,
            "resample": str(self.resample).lower(),
            "protocol": self.protocol,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "category_column": self.category_column,
            "class_column": self.class_column,
            "out_dir": str(self.out_dir),
            "model_params": dict(self.model_params),
            "resample_params": dict(self.resample_params),
        }


@dataclass
class RunRecord:
    """What one experiment produced, including where the artifacts landed."""

    config: dict
    report: EvaluationReport | None
    train_size: int
    test_size: int
    duration_seconds: float
    run_dir: Path | None
    error: str | None = None


def _labels_for_task(table: FeatureTable, task: str) -> np.ndarray:
    return binary_labels(table) if task == "binary" else family_labels(table)


def _fit_model(config: ExperimentConfig, X: np.ndarray, y: np.ndarray, n_classes: int):
    overrides = dict(config.model_params)
    if config.model == "rf":
        return fit_forest(X, y, ForestParams(**{"seed": config.seed, **overrides}), n_classes=n_classes)
    if config.model == "knn":
        return fit_knn(X, y, KnnParams(**overrides), n_classes=n_classes)
    if config.model == "xgb":
        return fit_gbt(X, y, GbtParams(**overrides), n_classes=n_classes)
    if "hidden" in overrides:
        overrides["hidden"] = tuple(overrides["hidden"])
    return fit_mlp(X, y, MlpParams(**{"seed": config.seed, **overrides}), n_classes=n_classes)


def _resample_train(config: ExperimentConfig, X: np.ndarray, y: np.ndarray):
    technique = str(config.resample).lower()
    overrides = dict(config.resample_params)
    if technique == "adasyn":
        params = AdasynParams(**{"seed": config.seed, **overrides})
        return apply_technique(technique, X, y, oversample=params)
    # Undersamplers default to shrinking every class except the smallest,
    # which balances the table at the minority count.
    target = overrides.pop("target_classes", "not_minority")
    if isinstance(target, (list, tuple, set, frozenset)):
        target = frozenset(int(t) for t in target)
    else:
        target = resolve_target_classes(y, target)
    params = UndersampleParams(**{"seed": config.seed, **overrides, "target_classes": target})
    return apply_technique(technique, X, y, undersample=params)


def _prepare_partitions(config: ExperimentConfig, table: FeatureTable):
    """Split, standardize, and rebalance according to the configured protocol.

    Returns (X_train, y_train, X_test, y_test, codec, standardizer, extras).
    """
    labels = _labels_for_task(table, config.task)
    codec = LabelCodec.from_labels(labels)
    spec = SplitSpec(
        train_fraction=config.train_fraction,
        seed=config.seed,
        stratify_on="class" if config.task == "binary" else "family",
    )
    technique = str(config.resample).lower()
    extras: dict = {"technique": technique, "protocol": config.protocol}

    if config.protocol == "leak_free":
        train_idx, test_idx = stratified_split_indices(labels, spec)
        standardizer = fit_standardizer(table.take(train_idx))
        X_train = apply_standardizer(standardizer, table.features[train_idx])
        X_test = apply_standardizer(standardizer, table.features[test_idx])
        y_train = codec.encode(labels[train_idx])
        y_test = codec.encode(labels[test_idx])
        resampled = _resample_train(config, X_train, y_train)
        extras["train_size_before_resample"] = int(train_idx.size)
        extras["synthetic_rows"] = int(resampled.synthetic.sum())
        return resampled.features, resampled.labels, X_test, y_test, codec, standardizer, extras

    # resample_before_split: standardize and rebalance the full table first.
    standardizer = fit_standardizer(table)
    X_full = apply_standardizer(standardizer, table.features)
    y_full = codec.encode(labels)
    resampled = _resample_train(config, X_full, y_full)
    extras["resampled_total"] = int(resampled.n_rows)
    extras["synthetic_rows"] = int(resampled.synthetic.sum())
    resampled_names = codec.decode(resampled.labels)
    train_idx, test_idx = stratified_split_indices(resampled_names, spec)
    return (
        resampled.features[train_idx],
        resampled.labels[train_idx],
        resampled.features[test_idx],
        resampled.labels[test_idx],
        codec,
        standardizer,
        extras,
    )


def _run_dir(config: ExperimentConfig) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    technique = str(config.resample).lower()
    path = Path(config.out_dir) / f"{stamp}-{config.model}-{technique}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def run_experiment(config: ExperimentConfig, table: FeatureTable | None = None,
                   write_artifacts: bool = True) -> RunRecord:
    """Execute one configured experiment and (optionally) write its artifacts."""
    config = config.validate()
    started = time.perf_counter()
    if table is None:
        table = load_csv(config.dataset, config.category_column, config.class_column)

    X_train, y_train, X_test, y_test, codec, standardizer, extras = _prepare_partitions(config, table)
    model = _fit_model(config, X_train, y_train, codec.n_classes)
    y_pred = np.asarray(model.predict(X_test))

    cm = confusion(y_test, y_pred, codec)
    metadata = {
        "model": config.model,
        "technique": extras["technique"],
        "task": config.task,
        "protocol": config.protocol,
        "seed": config.seed,
        "train_size": int(X_train.shape[0]),
        "test_size": int(X_test.shape[0]),
        **{k: v for k, v in extras.items() if k not in ("technique", "protocol")},
    }
    if config.task == "multiclass" and BENIGN_LABEL in codec.classes:
        leaked, rate = malicious_leakage(cm)
        metadata["malicious_leakage_count"] = leaked
        metadata["malicious_leakage_rate"] = rate
    report = metrics_from_confusion(cm, averaging="weighted", metadata=metadata)

    run_dir = None
    if write_artifacts:
        run_dir = _run_dir(config)
        (run_dir / "report.json").write_text(render_report(report, "json") + "\n", encoding="utf-8")
        (run_dir / "confusion.csv").write_text(confusion_to_csv(cm), encoding="utf-8")
        save_confusion_heatmap(cm, run_dir / "confusion.png",
                               title=f"{config.model} / {extras['technique']} ({config.task})")
        std_for_doc = standardizer
        if std_for_doc.feature_names is None:
            std_for_doc = StandardizationParams(
                mean=standardizer.mean, std=standardizer.std,
                constant=standardizer.constant, feature_names=table.feature_names,
            )
        save_model(model, codec, std_for_doc, run_dir / "model.json")
        snapshot = {"config": config.to_dict(), "metadata": metadata}
        (run_dir / "record.json").write_text(
            json.dumps(snapshot, indent=2, sort_keys=True), encoding="utf-8"
        )

    return RunRecord(
        config=config.to_dict(),
        report=report,
        train_size=int(X_train.shape[0]),
        test_size=int(X_test.shape[0]),
        duration_seconds=time.perf_counter() - started,
        run_dir=run_dir,
    )


def run_suite(configs: list[ExperimentConfig], out_dir: str | Path = "runs",
              write_artifacts: bool = True) -> tuple[list[RunRecord], Path | None]:
    """Run a list of experiments, continuing past individual failures.

    Writes summary.csv (one metric row per run), a grouped bar chart, and
    a best-technique-per-model listing under ``out_dir``.
    """
    records: list[RunRecord] = []
    shared_table: dict[str, FeatureTable] = {}
    for config in configs:
        try:
            config = config.validate()
            key = f"{config.dataset}|{config.category_column}|{config.class_column}"
            if key not in shared_table:
                shared_table[key] = load_csv(config.dataset, config.category_column, config.class_column)
            records.append(run_experiment(config, table=shared_table[key], write_artifacts=write_artifacts))
        except Exception as exc:  # noqa: BLE001 - a suite reports per-run failures
            records.append(RunRecord(
                config=config.to_dict() if isinstance(config, ExperimentConfig) else {},
                report=None, train_size=0, test_size=0, duration_seconds=0.0,
                run_dir=None, error=f"{type(exc).__name__}: {exc}",
            ))

    summary_path = None
    if write_artifacts:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [SUMMARY_HEADER]
        rows_for_plot = []
        for record in records:
            if record.report is None:
                continue
            r = record.report
            model = r.metadata["model"]
            technique = r.metadata["technique"]
            lines.append(
                f"{model},{technique},{r.accuracy:.4f},{r.precision:.4f},{r.recall:.4f},{r.f1:.4f}"
            )
            rows_for_plot.append({"model": model, "technique": technique, "f1": r.f1,
                                  "accuracy": r.accuracy})
        summary_path = out / "summary.csv"
        summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        if rows_for_plot:
            save_suite_summary(rows_for_plot, out / "summary.png", metric="f1")
        best = best_technique_per_model(records)
        (out / "best_by_model.json").write_text(
            json.dumps(best, indent=2, sort_keys=True), encoding="utf-8"
        )
    return records, summary_path


def best_technique_per_model(records: list[RunRecord]) -> dict:
    """Highest-F1 technique per model among successful runs."""
    best: dict[str, dict] = {}
    for record in records:
        if record.report is None:
            continue
        r = record.report
        model = r.metadata["model"]
        entry = {"technique": r.metadata["technique"], "f1": r.f1, "accuracy": r.accuracy}
        if model not in best or entry["f1"] > best[model]["f1"]:
            best[model] = entry
    return best


def classify_csv(model_path, csv_path, category_column: str = "Category",
                 class_column: str = "Class") -> tuple[np.ndarray, np.ndarray, LabelCodec]:
    """Predict held-out rows with a persisted model.

    The CSV must carry exactly the feature columns the model was trained
    on (label columns are ignored if present); order does not matter.
    Returns (predicted labels, probabilities, codec).
    """
    from .persist import load_model

    model, codec, standardizer = load_model(model_path)
    table = load_csv(csv_path, category_column, class_column) if _has_label_columns(
        csv_path, category_column, class_column
    ) else _load_feature_only_csv(csv_path)

    expected = standardizer.feature_names
    if expected is None:
        if table.features.shape[1] != standardizer.mean.shape[0]:
            raise SchemaMismatchError(
                f"model expects {standardizer.mean.shape[0]} features, "
                f"CSV has {table.features.shape[1]}"
            )
        matrix = table.features
    else:
        present = dict(zip(table.feature_names, range(len(table.feature_names))))
        missing = [name for name in expected if name not in present]
        extra = [name for name in table.feature_names if name not in set(expected)]
        if missing or extra:
            raise SchemaMismatchError(
                f"feature columns do not match the model: missing {missing or 'none'}, "
                f"unexpected {extra or 'none'}"
            )
        order = [present[name] for name in expected]
        matrix = table.features[:, order]

    X = apply_standardizer(standardizer, matrix)
    proba = model.predict_proba(X)
    pred = codec.decode(np.asarray(proba).argmax(axis=1))
    return pred, np.asarray(proba), codec


def _has_label_columns(csv_path, category_column, class_column) -> bool:
    import pandas as pd

    try:
        header = pd.read_csv(csv_path, nrows=0)
    except Exception:
        return True  # let load_csv produce the proper error
    return category_column in header.columns and class_column in header.columns


def _load_feature_only_csv(csv_path) -> FeatureTable:
    import pandas as pd

    from .errors import DatasetError

    try:
        frame = pd.read_csv(csv_path)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"dataset file is empty: {csv_path}") from None
    if len(frame) == 0:
        raise DatasetError(f"dataset has a header but no data rows: {csv_path}")
    feats = np.empty((len(frame), frame.shape[1]), dtype=np.float64)
    for j, col in enumerate(frame.columns):
        numeric = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(numeric)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DatasetError(
                f"non-numeric or non-finite value {frame[col].iloc[i]!r} at data row {i}, column {col!r}"
            )
        feats[:, j] = numeric
    placeholder = np.array(["Unknown"] * len(frame))
    return FeatureTable(
        features=feats,
        feature_names=tuple(frame.columns),
        category_raw=placeholder,
        class_raw=placeholder,
    )


def inspect_dataset(path, category_column: str = "Category", class_column: str = "Class") -> dict:
    """Row/feature counts, class balance, and family shares of a dataset."""
    table = load_csv(path, category_column, class_column)
    classes = binary_labels(table)
    class_names, class_counts = np.unique(classes, return_counts=True)
    mal = is_malicious(table)
    return {
        "rows": int(table.n_rows),
        "features": int(table.n_features),
        "class_counts": {str(n): int(c) for n, c in zip(class_names, class_counts)},
        "malicious_rows": int(mal.sum()),
        "family_counts": family_distribution(table),
        "malicious_family_share": malicious_family_share(table),
    }
