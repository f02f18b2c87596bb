"""Save and load trained models as one self-describing JSON document.

The document carries everything prediction needs: the model's own
parameters and fitted state, the label codec, and the standardization
parameters (with feature names when known).  Floats round-trip exactly
because json emits shortest-repr doubles.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ModelFormatError
from .ingest import LabelCodec, StandardizationParams
from .models import (
    ForestModel,
    ForestParams,
    GbtModel,
    GbtParams,
    KnnModel,
    KnnParams,
    MlpModel,
    MlpParams,
)
from .models._grow import TreeArrays
from .models.tree import DecisionTree, TreeParams

FORMAT_NAME = "malmem-model"
SCHEMA_VERSION = 1


def _tree_arrays_to_dict(arrays: TreeArrays) -> dict:
    leaf_idx = np.flatnonzero(arrays.is_leaf())
    return {
        "feature": arrays.feature.tolist(),
        "threshold": [None if not np.isfinite(t) else float(t) for t in arrays.threshold],
        "left": arrays.left.tolist(),
        "right": arrays.right.tolist(),
        "leaf_index": leaf_idx.tolist(),
        "leaf_value": arrays.value[leaf_idx].tolist(),
    }


def _tree_arrays_from_dict(payload: dict, value_width: int) -> TreeArrays:
    feature = np.asarray(payload["feature"], dtype=np.int64)
    n = feature.shape[0]
    threshold = np.array(
        [np.nan if t is None else float(t) for t in payload["threshold"]], dtype=np.float64
    )
    value = np.zeros((n, value_width))
    leaf_idx = np.asarray(payload["leaf_index"], dtype=np.int64)
    if leaf_idx.size:
        value[leaf_idx] = np.asarray(payload["leaf_value"], dtype=np.float64)
    return TreeArrays(
        feature=feature,
        threshold=threshold,
        left=np.asarray(payload["left"], dtype=np.int64),
        right=np.asarray(payload["right"], dtype=np.int64),
        value=value,
    )


def _model_payload(model) -> tuple[str, dict]:
    if isinstance(model, ForestModel):
        return "rf", {
            "params": asdict(model.params),
            "n_classes": model.n_classes,
            "trees": [
                {"arrays": _tree_arrays_to_dict(t.arrays)} for t in model.trees
            ],
            "tree_params": asdict(model.trees[0].params) if model.trees else None,
        }
    if isinstance(model, KnnModel):
        return "knn", {
            "params": asdict(model.params),
            "n_classes": model.n_classes,
            "X": model.X.tolist(),
            "y": model.y.tolist(),
        }
    if isinstance(model, GbtModel):
        return "xgb", {
            "params": asdict(model.params),
            "n_classes": model.n_classes,
            "train_loss": [float(v) for v in model.train_loss],
            "rounds": [
                [_tree_arrays_to_dict(tree) for tree in round_trees]
                for round_trees in model.trees
            ],
        }
    if isinstance(model, MlpModel):
        return "mlp", {
            "params": asdict(model.params) | {"hidden": list(model.params.hidden)},
            "n_classes": model.n_classes,
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "train_loss": [float(v) for v in model.train_loss],
            "epochs_run": model.epochs_run,
        }
    raise ModelFormatError(f"cannot persist model of type {type(model).__name__}")


def _model_from_payload(kind: str, payload: dict):
    try:
        if kind == "rf":
            params = ForestParams(**payload["params"])
            tp = payload.get("tree_params") or {}
            tree_params = TreeParams(**tp)
            n_classes = int(payload["n_classes"])
            trees = [
                DecisionTree(
                    arrays=_tree_arrays_from_dict(t["arrays"], n_classes),
                    n_classes=n_classes,
                    params=tree_params,
                )
                for t in payload["trees"]
            ]
            return ForestModel(trees=trees, n_classes=n_classes, params=params)
        if kind == "knn":
            params = KnnParams(**payload["params"])
            return KnnModel(
                X=np.asarray(payload["X"], dtype=np.float64),
                y=np.asarray(payload["y"], dtype=np.int64),
                n_classes=int(payload["n_classes"]),
                params=params,
            )
        if kind == "xgb":
            params = GbtParams(**payload["params"])
            trees = [
                [_tree_arrays_from_dict(t, 1) for t in round_trees]
                for round_trees in payload["rounds"]
            ]
            return GbtModel(
                trees=trees,
                n_classes=int(payload["n_classes"]),
                params=params,
                train_loss=[float(v) for v in payload.get("train_loss", [])],
            )
        if kind == "mlp":
            raw = dict(payload["params"])
            raw["hidden"] = tuple(raw["hidden"])
            params = MlpParams(**raw)
            return MlpModel(
                weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
                biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
                n_classes=int(payload["n_classes"]),
                params=params,
                train_loss=[float(v) for v in payload.get("train_loss", [])],
                epochs_run=int(payload.get("epochs_run", 0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model payload for kind {kind!r} is malformed: {exc}") from None
    raise ModelFormatError(f"unknown model_kind {kind!r}")


def save_model(model, codec: LabelCodec, standardizer: StandardizationParams, path) -> Path:
    """Write the full prediction bundle to ``path`` as JSON."""
    kind, payload = _model_payload(model)
    document = {
        "format": FORMAT_NAME,
        "schema_version": SCHEMA_VERSION,
        "model_kind": kind,
        "label_classes": list(codec.classes),
        "standardizer": {
            "mean": standardizer.mean.tolist(),
            "std": standardizer.std.tolist(),
            "constant": standardizer.constant.astype(bool).tolist(),
            "feature_names": list(standardizer.feature_names) if standardizer.feature_names else None,
        },
        "model": payload,
    }
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(document, allow_nan=False), encoding="utf-8")
    return out


def load_model(path) -> tuple[object, LabelCodec, StandardizationParams]:
    """Read a bundle back; raises ModelFormatError for foreign or damaged files."""
    p = Path(path)
    if not p.is_file():
        raise ModelFormatError(f"model file not found: {p}")
    try:
        document = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"model file {p} is not readable JSON: {exc}") from None
    if not isinstance(document, dict) or document.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"{p} is not a model document")
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(
            f"unsupported model schema version {version!r} (this build reads {SCHEMA_VERSION})"
        )
    try:
        codec = LabelCodec(classes=tuple(document["label_classes"]))
        std_doc = document["standardizer"]
        names = std_doc.get("feature_names")
        standardizer = StandardizationParams(
            mean=np.asarray(std_doc["mean"], dtype=np.float64),
            std=np.asarray(std_doc["std"], dtype=np.float64),
            constant=np.asarray(std_doc["constant"], dtype=bool),
            feature_names=tuple(names) if names else None,
        )
        model = _model_from_payload(document["model_kind"], document["model"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"model document {p} is missing fields: {exc}") from None
    return model, codec, standardizer
