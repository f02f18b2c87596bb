"""Command-line interface.

Verbs: ``run`` (one experiment), ``suite`` (a grid of experiments),
``classify`` (apply a saved model to a CSV), and ``inspect-dataset``
(shape and label balance of a CSV).  Exit codes: 0 on success, 1 on
configuration or input validation errors, 2 on unexpected runtime
failures.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, DatasetError, MalmemError, ModelFormatError, SchemaMismatchError
from .runner import (
    MODELS,
    PROTOCOLS,
    TASKS,
    ExperimentConfig,
    RunRecord,
    best_technique_per_model,
    classify_csv,
    inspect_dataset,
    run_experiment,
    run_suite,
)
from .resample import TECHNIQUES

ENV_DATASET = "MALMEM_DATA"


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file; command-line flags override its keys")
    parser.add_argument("--dataset", default=None,
                        help=f"feature CSV path (falls back to ${ENV_DATASET})")
    parser.add_argument("--task", choices=TASKS, default=None)
    parser.add_argument("--resample", default=None,
                        help=f"one of {', '.join(TECHNIQUES)} (case-insensitive)")
    parser.add_argument("--protocol", choices=("leak-free", "resample-before-split"), default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="directory for run artifacts (default: runs)")


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return payload


def _merge_config(args, file_config: dict, model: str | None) -> ExperimentConfig:
    merged = dict(file_config)
    overrides = {
        "dataset": args.dataset,
        "task": args.task,
        "resample": args.resample,
        "protocol": args.protocol.replace("-", "_") if args.protocol else None,
        "seed": args.seed,
        "out_dir": args.out,
    }
    if model is not None:
        overrides["model"] = model
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if not merged.get("dataset"):
        env = os.environ.get(ENV_DATASET)
        if env:
            merged["dataset"] = env
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    unknown = set(merged) - known - {"models", "resamples"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: v for k, v in merged.items() if k in known}
    try:
        return ExperimentConfig(**kwargs).validate()
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def _print_report_summary(record: RunRecord):
    r = record.report
    print(
        f"{r.metadata['model']}/{r.metadata['technique']}: "
        f"accuracy={r.accuracy:.4f} precision={r.precision:.4f} "
        f"recall={r.recall:.4f} f1={r.f1:.4f} "
        f"(train={record.train_size}, test={record.test_size}, "
        f"{record.duration_seconds:.1f}s)"
    )
    if "malicious_leakage_rate" in r.metadata:
        print(
            f"  malicious rows predicted benign: {r.metadata['malicious_leakage_count']} "
            f"({r.metadata['malicious_leakage_rate']:.4%})"
        )
    if record.run_dir is not None:
        print(f"  artifacts: {record.run_dir}")


def _cmd_run(args) -> int:
    file_config = _load_config_file(args.config)
    config = _merge_config(args, file_config, args.model)
    record = run_experiment(config)
    _print_report_summary(record)
    return 0


def _cmd_suite(args) -> int:
    file_config = _load_config_file(args.config)
    models = args.models.split(",") if args.models else file_config.get("models", list(MODELS))
    if args.resamples:
        resamples = args.resamples.split(",")
    elif args.resample:
        resamples = [args.resample]
    else:
        resamples = file_config.get("resamples", ["none"])
    args.resample = None  # the grid below carries the technique
    base = {k: v for k, v in file_config.items() if k not in ("models", "resamples")}
    configs = []
    for model in [m.strip().lower() for m in models if m.strip()]:
        for technique in [t.strip().lower() for t in resamples if t.strip()]:
            configs.append(_merge_config(args, {**base, "resample": technique}, model))
    out_dir = configs[0].out_dir if configs else (args.out or "runs")
    records, summary_path = run_suite(configs, out_dir=out_dir)
    failures = 0
    for record in records:
        if record.error is not None:
            failures += 1
            print(f"FAILED {record.config.get('model')}/{record.config.get('resample')}: {record.error}")
        else:
            _print_report_summary(record)
    best = best_technique_per_model(records)
    if best:
        print("best technique per model (by weighted F1):")
        for model in sorted(best):
            entry = best[model]
            print(f"  {model}: {entry['technique']} (f1={entry['f1']:.4f})")
    if summary_path is not None:
        print(f"summary: {summary_path}")
    return 0 if failures == 0 else 2


def _cmd_classify(args) -> int:
    pred, proba, codec = classify_csv(args.model_file, args.input)
    lines = ["row,prediction," + ",".join(f"p_{name}" for name in codec.classes)]
    for i, (label, dist) in enumerate(zip(pred, proba)):
        lines.append(f"{i},{label}," + ",".join(f"{p:.6f}" for p in dist))
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {len(pred)} predictions to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_inspect(args) -> int:
    dataset = args.dataset or os.environ.get(ENV_DATASET)
    if not dataset:
        raise ConfigError(f"no dataset given (flag --dataset or ${ENV_DATASET})")
    info = inspect_dataset(dataset)
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="malmem",
        description="Detect and categorize obfuscated malware from memory-dump feature CSVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    _add_common_flags(run_p)
    run_p.add_argument("--model", choices=MODELS, default=None)
    run_p.set_defaults(handler=_cmd_run)

    suite_p = sub.add_parser("suite", help="run a grid of experiments")
    _add_common_flags(suite_p)
    suite_p.add_argument("--models", default=None, help="comma-separated subset of rf,mlp,knn,xgb")
    suite_p.add_argument("--resamples", default=None,
                         help="comma-separated techniques to sweep (default: none)")
    suite_p.set_defaults(handler=_cmd_suite)

    cls_p = sub.add_parser("classify", help="apply a saved model to a CSV")
    cls_p.add_argument("model_file", help="model.json written by a run")
    cls_p.add_argument("input", help="CSV of feature rows")
    cls_p.add_argument("--output", default=None, help="write predictions CSV here instead of stdout")
    cls_p.set_defaults(handler=_cmd_classify)

    ins_p = sub.add_parser("inspect-dataset", help="print dataset shape and label balance")
    ins_p.add_argument("--dataset", default=None,
                       help=f"feature CSV path (falls back to ${ENV_DATASET})")
    ins_p.set_defaults(handler=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, DatasetError, ModelFormatError, SchemaMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MalmemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
