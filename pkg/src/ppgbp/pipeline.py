"""Experiment runner binding ingestion, preprocessing, extractors, heads,
stacking, and reporting."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, architectures
from .classifiers import ForestConfig, rf_fit, rf_predict_proba, svm_fit, svm_predict_proba
from .dataset import (
    BinaryClass,
    CLASS_ORDER,
    apply_split,
    load_manifest,
    load_segments,
    split_subjects,
)
from .ensemble import StackConfig, stack_fit, stack_predict
from .metrics import compute_metrics, confusion
from .nn import TrainConfig, train
from .preprocess import PreprocessConfig, preprocess_signal
from .spectral import StftConfig, log_magnitude, stft
from .synth import corpus_as_segments, make_synthetic_corpus

REPORT_SCHEMA_VERSION = 1

HEAD_NAMES = ("softmax", "svm", "rf")
EPOCHS_FOR_BATCH = {16: 100, 3: 300}


class PipelineError(Exception):
    pass


class ConfigError(PipelineError):
    pass


class LeakageError(PipelineError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str | None = None
    synthetic: bool = False
    synthetic_segments: int = 600
    extractor: str = "cnn"
    head: str = "softmax"
    batch_size: int = 16
    max_epochs: int | None = None  # None derives from batch size (16->100, 3->300)
    stacked: bool = False
    seed: int = 0
    train_fraction: float = 0.7
    out_dir: str = "runs"
    stft_window: int = 256
    stft_hop: int = 64
    svm_c: float = 1.0
    svm_tol: float = 1e-3
    svm_kernel: str = "rbf"
    rf_estimators: int = 300
    rf_max_depth: int = 100
    rf_min_samples_split: int = 3

    def validate(self):
        if self.extractor not in architectures.EXTRACTOR_NAMES:
            raise ConfigError(f"unknown extractor {self.extractor!r}")
        if self.head not in HEAD_NAMES:
            raise ConfigError(f"unknown head {self.head!r}")
        if not self.synthetic and self.manifest is None:
            raise ConfigError("either a manifest path or synthetic mode is required")
        if self.batch_size not in EPOCHS_FOR_BATCH:
            raise ConfigError(
                f"batch_size must be one of {sorted(EPOCHS_FOR_BATCH)}, "
                f"got {self.batch_size}")
        if not (0 < self.train_fraction < 1):
            raise ConfigError(f"train_fraction must be in (0,1), got {self.train_fraction}")

    @property
    def epochs(self) -> int:
        if self.max_epochs is not None:
            return self.max_epochs
        return EPOCHS_FOR_BATCH.get(self.batch_size, 100)


def load_dataset(config: ExperimentConfig):
    """Segments according to config: manifest-backed or synthetic."""
    if config.synthetic:
        signals, labels, subjects = make_synthetic_corpus(
            config.synthetic_segments, seed=config.seed)
        return corpus_as_segments(signals, labels, subjects)
    records = load_manifest(config.manifest)
    return load_segments(records)


def prepare_inputs(segments, config: ExperimentConfig,
                   preprocess: PreprocessConfig = PreprocessConfig()):
    """Preprocess and tensorize: (inputs, labels, subject ids).

    Raw extractors see (n, 1, 2100); the spectrogram extractor sees
    (n, bins, frames) log-magnitudes.
    """
    processed = np.stack([preprocess_signal(s.samples, preprocess) for s in segments])
    if config.extractor == "stft_cnn":
        stft_cfg = StftConfig(window_length=config.stft_window, hop=config.stft_hop,
                              window="hann")
        X = np.stack([
            log_magnitude(stft(x, stft_cfg)).T  # (bins, frames): bins as channels
            for x in processed
        ])
    else:
        X = processed[:, None, :]
    labels = np.array([CLASS_ORDER.index(s.record.label) for s in segments], dtype=int)
    subjects = [s.record.subject_id for s in segments]
    return X, labels, subjects


def _train_config(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(batch_size=config.batch_size, max_epochs=config.epochs,
                       seed=config.seed)


def fit_extractor(config: ExperimentConfig, X, y, tags):
    spec = architectures.build_extractor(config.extractor)
    return train(spec, X, y, _train_config(config), tags=tags)


def fit_head(config: ExperimentConfig, model, X, y):
    """Fit the configured head over extractor features; returns a
    predict_proba callable (class order: PreHypertension, Hypertension)."""
    if config.head == "softmax":
        return model.predict_proba
    feats = model.extract_features(X)
    if config.head == "svm":
        svm = svm_fit(feats, np.where(y == 1, 1.0, -1.0), kernel=config.svm_kernel,
                      C=config.svm_c, tol=config.svm_tol)
        return lambda Z: svm_predict_proba(svm, model.extract_features(Z))
    forest = rf_fit(feats, y, ForestConfig(
        n_estimators=config.rf_estimators, max_depth=config.rf_max_depth,
        min_samples_split=config.rf_min_samples_split, seed=config.seed))
    return lambda Z: rf_predict_proba(forest, model.extract_features(Z))


class PipelineLearner:
    """Extractor + head pipeline exposing fit/predict_proba, usable as a
    stacking base learner."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.model = None
        self._proba = None

    def fit(self, X, y, tags=None):
        self.model = fit_extractor(self.config, X, y, tags)
        self._proba = fit_head(self.config, self.model, X, y)
        return self

    def predict_proba(self, X):
        return self._proba(X)

    @property
    def provenance(self):
        return self.model.provenance if self.model is not None else frozenset()


def assert_no_leakage(provenance, test_subjects):
    overlap = set(provenance) & set(test_subjects)
    if overlap:
        raise LeakageError(f"test subjects seen during fitting: {sorted(overlap)[:5]}")


def _evaluate(pred_labels, true_labels):
    per_class = {}
    for idx, cls in enumerate(CLASS_ORDER):
        cm = confusion([CLASS_ORDER[p] for p in pred_labels],
                       [CLASS_ORDER[t] for t in true_labels], positive_class=cls)
        rep = compute_metrics(cm)
        per_class[cls.value] = {
            "precision": rep.precision, "recall": rep.recall, "f1": rep.f1,
            "specificity": rep.specificity, "accuracy": rep.accuracy,
            "tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
        }
    return per_class


@dataclass
class RunReport:
    config: dict
    status: str = "ok"
    error: str | None = None
    per_class: dict = field(default_factory=dict)
    curves: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    seed: int = 0
    versions: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "per_class": self.per_class,
            "curves": self.curves,
            "diagnostics": self.diagnostics,
            "wall_clock_s": self.wall_clock_s,
            "seed": self.seed,
            "versions": self.versions,
        }


def run_experiment(config: ExperimentConfig, _shared_cache: dict | None = None) -> RunReport:
    """ingest -> split -> preprocess -> train -> (head/stack) -> evaluate."""
    config.validate()
    start = time.perf_counter()
    segments = load_dataset(config)
    plan = split_subjects([s.record for s in segments], config.train_fraction, config.seed)
    train_records, _ = apply_split([s.record for s in segments], plan)
    train_keys = {(r.subject_id, r.segment_index) for r in train_records}
    train_segs = [s for s in segments if (s.record.subject_id, s.record.segment_index) in train_keys]
    test_segs = [s for s in segments if (s.record.subject_id, s.record.segment_index) not in train_keys]

    X_tr, y_tr, subj_tr = prepare_inputs(train_segs, config)
    X_te, y_te, subj_te = prepare_inputs(test_segs, config)

    report = RunReport(
        config={k: v for k, v in asdict(config).items()},
        seed=config.seed,
        versions={"ppgbp": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        diagnostics={"n_train_segments": len(train_segs), "n_test_segments": len(test_segs),
                     "n_train_subjects": len(plan.train), "n_test_subjects": len(plan.test)},
    )

    if config.stacked:
        stack_cfg = StackConfig(seed=config.seed)
        stacked = stack_fit(X_tr, y_tr, [PipelineLearner(config)], stack_cfg, tags=subj_tr)
        for base in stacked.bases:
            assert_no_leakage(base.provenance, subj_te)
        # fold-2 labels must never reach base fitting
        fold2_subjects = {subj_tr[i] for i in stacked.fold2_idx}
        fold1_subjects = {subj_tr[i] for i in stacked.fold1_idx}
        assert_no_leakage(stacked.bases[0].provenance, fold2_subjects - fold1_subjects)
        preds, _ = stack_predict(stacked, X_te)
        fold2_preds, _ = stack_predict(stacked, X_tr[stacked.fold2_idx])
        report.diagnostics["fold2_resubstitution_accuracy"] = float(
            np.mean(fold2_preds == y_tr[stacked.fold2_idx]))
        report.diagnostics["fold_sizes"] = [len(stacked.fold1_idx), len(stacked.fold2_idx)]
        report.curves = stacked.meta.history
    else:
        cache_key = (config.extractor, config.batch_size, config.seed)
        if _shared_cache is not None and cache_key in _shared_cache:
            model = _shared_cache[cache_key]
        else:
            model = fit_extractor(config, X_tr, y_tr, tags=subj_tr)
            if _shared_cache is not None:
                _shared_cache[cache_key] = model
        assert_no_leakage(model.provenance, subj_te)
        proba = fit_head(config, model, X_tr, y_tr)
        preds = proba(X_te).argmax(axis=1)
        report.curves = model.history

    report.per_class = _evaluate(preds, y_te)
    report.wall_clock_s = time.perf_counter() - start
    return report


def make_grid(base: ExperimentConfig):
    """The full model grid: 5 extractors x 3 heads x 2 batch sizes, plus the
    15 stacked variants (one per extractor-head pipeline)."""
    from dataclasses import replace

    configs = []
    for extractor in architectures.EXTRACTOR_NAMES:
        for head in HEAD_NAMES:
            for batch in (16, 3):
                configs.append(replace(base, extractor=extractor, head=head,
                                       batch_size=batch, stacked=False))
    for extractor in architectures.EXTRACTOR_NAMES:
        for head in HEAD_NAMES:
            configs.append(replace(base, extractor=extractor, head=head,
                                   batch_size=16, stacked=True))
    return configs


def run_grid(configs) -> list:
    """Run every config; per-run failures are recorded and the grid continues.
    Extractor training is shared across heads with identical (extractor,
    batch, seed)."""
    cache = {}
    reports = []
    for cfg in configs:
        try:
            reports.append(run_experiment(cfg, _shared_cache=cache))
        except Exception as exc:  # noqa: BLE001 - isolation contract
            reports.append(RunReport(config=asdict(cfg), status="failed", error=str(exc),
                                     seed=cfg.seed))
    return reports


CSV_COLUMNS = ["model", "head", "batch_size", "class",
               "precision", "recall", "f1", "specificity", "accuracy"]


def emit_report(reports, fmt: str, out_dir) -> list[Path]:
    """Write reports as schema-versioned JSON and/or flat CSV."""
    if not reports:
        raise ValueError("need at least one report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = out_dir / "reports.json"
        payload = {"schema_version": REPORT_SCHEMA_VERSION,
                   "reports": [r.to_dict() for r in reports]}
        path.write_text(json.dumps(payload, indent=2))
        written.append(path)
    if fmt in ("csv", "both"):
        import csv as _csv

        path = out_dir / "reports.csv"
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in reports:
                if r.status != "ok":
                    continue
                model = r.config.get("extractor", "")
                if r.config.get("stacked"):
                    model = f"meta_{model}"
                for cls, vals in r.per_class.items():
                    writer.writerow([
                        model, r.config.get("head"), r.config.get("batch_size"), cls,
                        vals["precision"], vals["recall"], vals["f1"],
                        vals["specificity"], vals["accuracy"],
                    ])
        written.append(path)
    if not written:
        raise ValueError(f"unknown report format {fmt!r}")
    return written
