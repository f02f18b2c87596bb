import json

import numpy as np
import pytest

from malmem.errors import ConfigError, SchemaMismatchError
from malmem.runner import (
    SUMMARY_HEADER,
    ExperimentConfig,
    best_technique_per_model,
    classify_csv,
    inspect_dataset,
    run_experiment,
    run_suite,
)

MODEL_SMALL = {
    "rf": {"n_trees": 5, "max_depth": 8},
    "xgb": {"n_rounds": 5, "max_depth": 3},
    "knn": {"k": 3},
    "mlp": {"hidden": (8,), "max_epochs": 10},
}


def _config(dataset, tmp_path, **overrides):
    base = dict(
        dataset=str(dataset),
        task="multiclass",
        model="rf",
        resample="none",
        protocol="leak_free",
        seed=0,
        out_dir=str(tmp_path / "runs"),
    )
    base.update(overrides)
    base.setdefault("model_params", MODEL_SMALL.get(base["model"], {}))
    return ExperimentConfig(**base)


# ------------------------------------------------------------- validation

def test_config_rejects_binary_with_resample(small_csv, tmp_path):
    with pytest.raises(ConfigError):
        _config(small_csv, tmp_path, task="binary", resample="random").validate()


def test_config_rejects_unknown_values(small_csv, tmp_path):
    bad = [
        dict(task="ranking"),
        dict(model="svm"),
        dict(resample="smote"),
        dict(protocol="oracle"),
        dict(train_fraction=1.0),
        dict(seed=-1),
    ]
    for overrides in bad:
        with pytest.raises(ConfigError):
            _config(small_csv, tmp_path, **overrides).validate()
    with pytest.raises(ConfigError):
        _config("", tmp_path).validate()


# ------------------------------------------------------------- experiments

def test_run_experiment_writes_all_artifacts(small_table, small_csv, tmp_path):
    record = run_experiment(_config(small_csv, tmp_path), table=small_table)
    assert record.error is None
    assert record.run_dir is not None
    for name in ("report.json", "confusion.csv", "confusion.png", "model.json", "record.json"):
        assert (record.run_dir / name).is_file(), name
    report = record.report
    for value in (report.accuracy, report.precision, report.recall, report.f1):
        assert 0.0 <= value <= 1.0
    assert report.metadata["model"] == "rf"
    assert report.metadata["technique"] == "none"
    assert report.metadata["malicious_leakage_rate"] <= 1.0
    # multiclass split holds back a fifth of the rows
    assert record.test_size == pytest.approx(record.train_size / 4, rel=0.05)


def test_run_experiment_is_deterministic(small_table, small_csv, tmp_path):
    a = run_experiment(_config(small_csv, tmp_path), table=small_table)
    b = run_experiment(_config(small_csv, tmp_path), table=small_table)
    assert a.run_dir != b.run_dir
    assert (a.run_dir / "report.json").read_bytes() == (b.run_dir / "report.json").read_bytes()
    assert (a.run_dir / "model.json").read_bytes() == (b.run_dir / "model.json").read_bytes()


def test_run_experiment_binary_task(small_table, small_csv, tmp_path):
    record = run_experiment(_config(small_csv, tmp_path, task="binary", model="knn"),
                            table=small_table)
    assert record.report.confusion.counts.shape == (2, 2)
    assert "malicious_leakage_rate" not in record.report.metadata
    assert record.report.accuracy > 0.9  # well-separated synthetic families


def test_leak_free_undersample_shrinks_train_only(small_table, small_csv, tmp_path):
    plain = run_experiment(_config(small_csv, tmp_path), table=small_table,
                           write_artifacts=False)
    shrunk = run_experiment(_config(small_csv, tmp_path, resample="random"),
                            table=small_table, write_artifacts=False)
    meta = shrunk.report.metadata
    assert meta["train_size_before_resample"] == plain.train_size
    assert shrunk.train_size < plain.train_size
    assert shrunk.test_size == plain.test_size
    assert meta["synthetic_rows"] == 0
    # balanced at the smallest family count
    counts = np.asarray(shrunk.report.confusion.counts).sum()
    assert counts == shrunk.test_size


def test_leak_free_adasyn_adds_synthetic_rows(small_table, small_csv, tmp_path):
    record = run_experiment(
        _config(small_csv, tmp_path, resample="adasyn",
                resample_params={"k": 3}),
        table=small_table, write_artifacts=False)
    meta = record.report.metadata
    assert meta["synthetic_rows"] > 0
    assert record.train_size == meta["train_size_before_resample"] + meta["synthetic_rows"]


def test_resample_before_split_reports_total(small_table, small_csv, tmp_path):
    record = run_experiment(
        _config(small_csv, tmp_path, resample="adasyn", protocol="resample_before_split",
                resample_params={"k": 3}),
        table=small_table, write_artifacts=False)
    meta = record.report.metadata
    assert meta["resampled_total"] == record.train_size + record.test_size
    assert meta["synthetic_rows"] > 0


@pytest.mark.parametrize("model", ["rf", "xgb", "knn", "mlp"])
def test_every_model_runs_multiclass(model, small_table, small_csv, tmp_path):
    record = run_experiment(_config(small_csv, tmp_path, model=model),
                            table=small_table, write_artifacts=False)
    assert record.error is None
    assert record.report.accuracy > 0.5


# ------------------------------------------------------------------ suites

def test_run_suite_continues_past_failures(small_csv, tmp_path):
    configs = [
        _config(small_csv, tmp_path, model="knn", out_dir=str(tmp_path / "suite")),
        _config(small_csv, tmp_path, task="binary", resample="random",
                out_dir=str(tmp_path / "suite")),  # invalid: fails validation
        _config(small_csv, tmp_path, model="xgb", resample="random",
                out_dir=str(tmp_path / "suite")),
    ]
    records, summary_path = run_suite(configs, out_dir=tmp_path / "suite")
    assert len(records) == 3
    assert records[0].error is None
    assert records[1].error is not None and "ConfigError" in records[1].error
    assert records[2].error is None

    text = summary_path.read_text(encoding="utf-8")
    lines = text.strip().split("\n")
    assert lines[0] == SUMMARY_HEADER
    assert len(lines) == 3  # header + the two successful runs
    assert (tmp_path / "suite" / "summary.png").is_file()

    best = json.loads((tmp_path / "suite" / "best_by_model.json").read_text(encoding="utf-8"))
    assert set(best) == {"knn", "xgb"}
    assert best == best_technique_per_model(records)


def test_best_technique_picks_highest_f1(small_table, small_csv, tmp_path):
    records = [
        run_experiment(_config(small_csv, tmp_path, model="knn", resample=technique),
                       table=small_table, write_artifacts=False)
        for technique in ("none", "random")
    ]
    best = best_technique_per_model(records)
    assert set(best) == {"knn"}
    f1s = {r.report.metadata["technique"]: r.report.f1 for r in records}
    assert best["knn"]["f1"] == max(f1s.values())
    assert f1s[best["knn"]["technique"]] == best["knn"]["f1"]


# ---------------------------------------------------------------- classify

def _trained_model_path(small_table, small_csv, tmp_path, **overrides):
    record = run_experiment(_config(small_csv, tmp_path, **overrides), table=small_table)
    return record.run_dir / "model.json"


def test_classify_csv_round_trip(small_table, small_csv, tmp_path):
    model_path = _trained_model_path(small_table, small_csv, tmp_path, model="knn")
    labels, proba, codec = classify_csv(model_path, small_csv)
    assert labels.shape[0] == small_table.n_rows
    assert proba.shape == (small_table.n_rows, codec.n_classes)
    assert set(np.unique(labels)) <= set(codec.classes)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_classify_feature_only_csv(small_table, small_csv, tmp_path):
    import pandas as pd

    model_path = _trained_model_path(small_table, small_csv, tmp_path, model="knn")
    frame = pd.read_csv(small_csv).drop(columns=["Category", "Class"]).head(7)
    feature_csv = tmp_path / "features_only.csv"
    frame.to_csv(feature_csv, index=False)
    labels, proba, codec = classify_csv(model_path, feature_csv)
    assert labels.shape == (7,)
    assert proba.shape == (7, codec.n_classes)


def test_classify_single_row(small_table, small_csv, tmp_path):
    import pandas as pd

    model_path = _trained_model_path(small_table, small_csv, tmp_path, model="rf")
    frame = pd.read_csv(small_csv).head(1)
    one_row = tmp_path / "one.csv"
    frame.to_csv(one_row, index=False)
    labels, proba, _ = classify_csv(model_path, one_row)
    assert labels.shape == (1,)
    assert proba.shape[0] == 1


def test_classify_schema_mismatch_names_columns(small_table, small_csv, tmp_path):
    import pandas as pd

    model_path = _trained_model_path(small_table, small_csv, tmp_path, model="knn")
    frame = pd.read_csv(small_csv)
    frame = frame.rename(columns={"feat_00": "totally_new"})
    renamed = tmp_path / "renamed.csv"
    frame.to_csv(renamed, index=False)
    with pytest.raises(SchemaMismatchError) as excinfo:
        classify_csv(model_path, renamed)
    message = str(excinfo.value)
    assert "feat_00" in message
    assert "totally_new" in message


# ----------------------------------------------------------------- inspect

def test_inspect_dataset_summary(small_csv, small_table):
    info = inspect_dataset(small_csv)
    assert info["rows"] == small_table.n_rows
    assert info["features"] == 55
    assert set(info["class_counts"]) == {"Benign", "Malware"}
    assert set(info["family_counts"]) == {"Benign", "Ransomware", "Spyware", "Trojan"}
    assert info["malicious_rows"] == sum(
        v for k, v in info["family_counts"].items() if k != "Benign")
    share = info["malicious_family_share"]
    assert set(share) == {"Ransomware", "Spyware", "Trojan"}
    assert sum(share.values()) == pytest.approx(1.0, abs=1e-12)
