"""Command-line experiment runner.

Verbs: ingest, preprocess, train, evaluate, grid, stack, report, synth.
Run configs are flat TOML key/value files mirroring ExperimentConfig fields.
Exit codes: 0 success, 1 config error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from .classifiers import ClassifierError
from .dataset import DatasetError, load_manifest
from .ensemble import EnsembleError
from .nn import NnError
from .pipeline import (
    ConfigError,
    ExperimentConfig,
    emit_report,
    load_dataset,
    make_grid,
    run_experiment,
    run_grid,
)
from .preprocess import PreprocessConfig, PreprocessError, preprocess_signal
from .spectral import SpectralError
from .synth import write_synthetic_dataset

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_TRAINING = 3


def load_config(path, overrides) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        unknown = set(raw) - fields
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _overrides(args) -> dict:
    out = {"seed": args.seed, "out_dir": args.out}
    if getattr(args, "synthetic", False):
        out["synthetic"] = True
    return out


def _write_curves(report, out_dir):
    path = Path(out_dir) / "training_curves.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for row in report.curves:
            writer.writerow([row["epoch"], row["train_loss"], row["val_loss"]])
    return path


def cmd_synth(args):
    manifest = write_synthetic_dataset(args.out or "synthetic_data",
                                       args.segments, seed=args.seed or 0)
    print(f"wrote synthetic dataset: {manifest}")
    return EXIT_OK


def cmd_ingest(args):
    cfg = load_config(args.config, _overrides(args))
    if cfg.synthetic:
        segments = load_dataset(cfg)
        records = [s.record for s in segments]
    else:
        records = load_manifest(cfg.manifest)
    subjects = {r.subject_id for r in records}
    by_label = {}
    for r in records:
        by_label[r.label.value] = by_label.get(r.label.value, 0) + 1
    by_stage = {}
    for r in records:
        by_stage[r.stage.value] = by_stage.get(r.stage.value, 0) + 1
    print(f"segments: {len(records)}  subjects: {len(subjects)}")
    print(f"classes: {by_label}")
    print(f"stages: {by_stage}")
    return EXIT_OK


def cmd_preprocess(args):
    cfg = load_config(args.config, _overrides(args))
    segments = load_dataset(cfg)
    out_dir = Path(cfg.out_dir) / "processed"
    out_dir.mkdir(parents=True, exist_ok=True)
    pp = PreprocessConfig()
    for seg in segments:
        processed = preprocess_signal(seg.samples, pp)
        name = f"{seg.record.subject_id}_{seg.record.segment_index}.txt"
        (out_dir / name).write_text("\n".join(repr(v) for v in processed))
    print(f"wrote {len(segments)} processed segments to {out_dir}")
    return EXIT_OK


def cmd_train(args):
    from .pipeline import fit_extractor, prepare_inputs

    cfg = load_config(args.config, _overrides(args))
    segments = load_dataset(cfg)
    X, y, subjects = prepare_inputs(segments, cfg)
    model = fit_extractor(cfg, X, y, tags=subjects)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / f"{cfg.extractor}_model.json"
    model.save(model_path)
    print(f"trained {cfg.extractor} for {len(model.history)} epochs "
          f"(best epoch {model.stopped_epoch}); saved {model_path}")
    return EXIT_OK


def _single_run(args, stacked=False):
    over = _overrides(args)
    if stacked:
        over["stacked"] = True
    cfg = load_config(args.config, over)
    report = run_experiment(cfg)
    paths = emit_report([report], args.format or "json", cfg.out_dir)
    if report.curves:
        paths.append(_write_curves(report, cfg.out_dir))
    for cls, vals in report.per_class.items():
        print(f"{cls}: accuracy={vals['accuracy']:.4f} precision={vals['precision']} "
              f"recall={vals['recall']}")
    print("wrote: " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def cmd_evaluate(args):
    return _single_run(args, stacked=False)


def cmd_stack(args):
    return _single_run(args, stacked=True)


def cmd_grid(args):
    cfg = load_config(args.config, _overrides(args))
    reports = run_grid(make_grid(cfg))
    paths = emit_report(reports, args.format or "both", cfg.out_dir)
    ok = sum(1 for r in reports if r.status == "ok")
    print(f"grid complete: {ok}/{len(reports)} runs ok")
    print("wrote: " + ", ".join(str(p) for p in paths))
    return EXIT_OK if ok == len(reports) else EXIT_TRAINING


def cmd_report(args):
    payload = json.loads(Path(args.input).read_text())
    from .pipeline import RunReport

    reports = [RunReport(**{k: v for k, v in r.items() if k != "schema_version"})
               for r in payload["reports"]]
    paths = emit_report(reports, args.format or "csv", args.out or ".")
    print("wrote: " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ppgbp",
                                     description="PPG hypertension classification experiments")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=["json", "csv", "both"], default=None)
        p.add_argument("--synthetic", action="store_true",
                       help="use the built-in synthetic corpus")

    for verb, fn in [("ingest", cmd_ingest), ("preprocess", cmd_preprocess),
                     ("train", cmd_train), ("evaluate", cmd_evaluate),
                     ("grid", cmd_grid), ("stack", cmd_stack)]:
        p = sub.add_parser(verb)
        common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("synth", help="generate a synthetic dataset on disk")
    p.add_argument("--out", default=None)
    p.add_argument("--segments", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("report", help="convert a JSON report bundle")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["json", "csv", "both"], default="csv")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, PreprocessError, SpectralError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NnError, ClassifierError, EnsembleError) as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
