import numpy as np

from malmem.evaluation import ConfusionMatrix
from malmem.ingest import LabelCodec
from malmem.plots import save_confusion_heatmap, save_suite_summary

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_heatmap_writes_png(tmp_path):
    codec = LabelCodec(classes=("Benign", "Ransomware", "Spyware", "Trojan"))
    counts = np.diag([40, 11, 12, 9]).astype(np.int64)
    counts[2, 0] = 3
    out = save_confusion_heatmap(
        ConfusionMatrix(counts=counts, codec=codec), tmp_path / "cm.png",
        title="rf / none (multiclass)")
    data = out.read_bytes()
    assert data[:8] == PNG_MAGIC
    assert len(data) > 1000


def test_heatmap_handles_all_zero_offdiagonal(tmp_path):
    codec = LabelCodec(classes=("Benign", "Malware"))
    out = save_confusion_heatmap(
        ConfusionMatrix(counts=np.zeros((2, 2), dtype=np.int64), codec=codec),
        tmp_path / "zero.png")
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_suite_summary_writes_png(tmp_path):
    rows = [
        {"model": "rf", "technique": "none", "f1": 0.87, "accuracy": 0.87},
        {"model": "rf", "technique": "random", "f1": 0.88, "accuracy": 0.88},
        {"model": "knn", "technique": "none", "f1": 0.81, "accuracy": 0.82},
    ]
    out = save_suite_summary(rows, tmp_path / "summary.png", metric="f1")
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_suite_summary_single_row(tmp_path):
    rows = [{"model": "mlp", "technique": "adasyn", "f1": 0.5, "accuracy": 0.5}]
    out = save_suite_summary(rows, tmp_path / "single.png")
    assert out.read_bytes()[:8] == PNG_MAGIC
