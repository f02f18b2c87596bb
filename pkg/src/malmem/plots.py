"""Matplotlib rendering of confusion matrices and suite summaries."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ConfusionMatrix


def save_confusion_heatmap(cm: ConfusionMatrix, path, title: str | None = None) -> Path:
    """Render the count matrix as an annotated heatmap PNG."""
    names = cm.class_names()
    counts = cm.counts
    size = max(4.0, 1.1 * len(names) + 2.0)
    fig, ax = plt.subplots(figsize=(size, size * 0.85))
    image = ax.imshow(counts, cmap="Blues")
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    cutoff = counts.max() / 2.0 if counts.max() else 0.5
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{int(counts[i, j]):,}", ha="center", va="center",
                    color="white" if counts[i, j] > cutoff else "black", fontsize=9)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def save_suite_summary(rows: list[dict], path, metric: str = "f1") -> Path:
    """Grouped bar chart of one metric across (model, technique) runs.

    ``rows`` are dicts with at least 'model', 'technique', and the metric.
    """
    models = sorted({r["model"] for r in rows})
    techniques = sorted({r["technique"] for r in rows})
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(models) + 2.0), 4.5))
    width = 0.8 / max(len(techniques), 1)
    base = np.arange(len(models), dtype=np.float64)
    for t_idx, tech in enumerate(techniques):
        values = []
        for model in models:
            match = [r[metric] for r in rows if r["model"] == model and r["technique"] == tech]
            values.append(match[0] if match else np.nan)
        ax.bar(base + t_idx * width, values, width=width, label=tech)
    ax.set_xticks(base + 0.4 - width / 2.0, models)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel(metric)
    ax.set_xlabel("model")
    ax.legend(title="technique", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
