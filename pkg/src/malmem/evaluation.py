"""Confusion matrices, averaged metrics, and report rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ingest import BENIGN_LABEL, LabelCodec

REPORT_SCHEMA = "malmem-report/1"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix indexed [true class][predicted class]."""

    counts: np.ndarray
    codec: LabelCodec

    def __post_init__(self):
        c = self.codec.n_classes
        counts = self.counts
        if counts.shape != (c, c):
            raise ValueError(f"confusion matrix must be ({c}, {c}), got {counts.shape}")
        if counts.dtype.kind not in "iu" or (counts < 0).any():
            raise ValueError("confusion matrix must hold non-negative integer counts")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def class_names(self) -> tuple[str, ...]:
        return self.codec.classes


def confusion(y_true, y_pred, codec: LabelCodec) -> ConfusionMatrix:
    """Count (true, predicted) pairs; codes must be valid for the codec."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError("y_true and y_pred must be 1-D and the same length")
    if t.size == 0:
        raise ValueError("cannot build a confusion matrix from zero predictions")
    c = codec.n_classes
    for name, arr in (("y_true", t), ("y_pred", p)):
        if arr.min() < 0 or arr.max() >= c:
            raise ValueError(f"{name} contains codes outside [0, {c})")
    counts = np.bincount(t * c + p, minlength=c * c).reshape(c, c)
    return ConfusionMatrix(counts=counts, codec=codec)


@dataclass(frozen=True)
class EvaluationReport:
    """Averaged metrics plus per-class detail for one experiment."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str
    per_class: dict
    confusion: ConfusionMatrix
    metadata: dict = field(default_factory=dict)


def metrics_from_confusion(cm: ConfusionMatrix, averaging: str = "weighted",
                           metadata: dict | None = None) -> EvaluationReport:
    """Precision/recall/F1 with weighted or macro averaging.

    Zero-denominator conventions: a class never predicted has precision 0,
    a class with no true rows has recall 0, and F1 is 0 when precision and
    recall are both 0.  Weighted averaging weights by true-class support,
    which makes weighted recall coincide with accuracy.
    """
    if averaging not in ("weighted", "macro"):
        raise ValueError(f"averaging must be 'weighted' or 'macro', got {averaging!r}")
    counts = cm.counts.astype(np.float64)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    tp = np.diag(counts)
    total = counts.sum()
    if total <= 0:
        raise ValueError("confusion matrix has no observations")

    precision = np.where(predicted > 0, tp / np.maximum(predicted, 1.0), 0.0)
    recall = np.where(support > 0, tp / np.maximum(support, 1.0), 0.0)
    pr_sum = precision + recall
    f1 = np.where(pr_sum > 0, 2.0 * precision * recall / np.where(pr_sum > 0, pr_sum, 1.0), 0.0)

    if averaging == "weighted":
        w = support / total
        avg = (float((precision * w).sum()), float((recall * w).sum()), float((f1 * w).sum()))
    else:
        avg = (float(precision.mean()), float(recall.mean()), float(f1.mean()))

    per_class = {
        name: {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
            "support": int(support[i]),
        }
        for i, name in enumerate(cm.class_names())
    }
    return EvaluationReport(
        accuracy=float(tp.sum() / total),
        precision=avg[0],
        recall=avg[1],
        f1=avg[2],
        averaging=averaging,
        per_class=per_class,
        confusion=cm,
        metadata=dict(metadata or {}),
    )


def malicious_leakage(cm: ConfusionMatrix, benign_label: str = BENIGN_LABEL) -> tuple[int, float]:
    """Count and rate of truly malicious rows predicted as the benign class."""
    benign = cm.codec.code_of(benign_label)
    counts = cm.counts
    mal_rows = [i for i in range(counts.shape[0]) if i != benign]
    leaked = int(counts[mal_rows, benign].sum())
    mal_total = int(counts[mal_rows, :].sum())
    return leaked, (leaked / mal_total if mal_total else 0.0)


def report_to_dict(report: EvaluationReport) -> dict:
    prefix = report.averaging
    return {
        "schema": REPORT_SCHEMA,
        "accuracy": report.accuracy,
        f"precision_{prefix}": report.precision,
        f"recall_{prefix}": report.recall,
        f"f1_{prefix}": report.f1,
        "averaging": report.averaging,
        "per_class": report.per_class,
        "confusion": {
            "classes": list(report.confusion.class_names()),
            "counts": report.confusion.counts.tolist(),
        },
        "metadata": report.metadata,
    }


def report_from_dict(payload: dict) -> EvaluationReport:
    averaging = payload["averaging"]
    codec = LabelCodec(classes=tuple(payload["confusion"]["classes"]))
    cm = ConfusionMatrix(
        counts=np.asarray(payload["confusion"]["counts"], dtype=np.int64), codec=codec
    )
    return EvaluationReport(
        accuracy=float(payload["accuracy"]),
        precision=float(payload[f"precision_{averaging}"]),
        recall=float(payload[f"recall_{averaging}"]),
        f1=float(payload[f"f1_{averaging}"]),
        averaging=averaging,
        per_class=payload["per_class"],
        confusion=cm,
        metadata=payload.get("metadata", {}),
    )


def render_report(report: EvaluationReport, style: str = "json") -> str:
    """Serialize a report as 'json' (full precision, stable key order),
    'csv' (one metric row), or 'ascii_table' (confusion grid)."""
    if style == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True, allow_nan=False)
    if style == "csv":
        meta = report.metadata
        row = [
            str(meta.get("model", "")),
            str(meta.get("technique", "")),
            f"{report.accuracy:.4f}",
            f"{report.precision:.4f}",
            f"{report.recall:.4f}",
            f"{report.f1:.4f}",
        ]
        return "model,technique,accuracy,precision,recall,f1\n" + ",".join(row) + "\n"
    if style == "ascii_table":
        names = report.confusion.class_names()
        counts = report.confusion.counts
        width = max(len("true\\pred"), *(len(n) for n in names), len(str(counts.max())))
        def cell(text):
            return str(text).rjust(width)
        lines = [" | ".join([cell("true\\pred"), *(cell(n) for n in names)])]
        lines.append("-+-".join(["-" * width] * (len(names) + 1)))
        for i, name in enumerate(names):
            lines.append(" | ".join([cell(name), *(cell(int(v)) for v in counts[i])]))
        return "\n".join(lines) + "\n"
    raise ValueError(f"style must be 'json', 'csv', or 'ascii_table', got {style!r}")


def parse_report(text: str) -> EvaluationReport:
    """Inverse of render_report's json style."""
    payload = json.loads(text)
    if payload.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unrecognized report schema {payload.get('schema')!r}")
    return report_from_dict(payload)


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    """Confusion matrix as CSV with class names on both axes."""
    names = cm.class_names()
    lines = ["true\\pred," + ",".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(str(int(v)) for v in cm.counts[i]))
    return "\n".join(lines) + "\n"
