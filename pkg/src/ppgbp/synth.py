"""Built-in synthetic corpus: two classes of band-limited pulse trains at
distinct fundamentals, shaped like 2.1 s PPG segments at 1 kHz.

Used for end-to-end tests and demos without the clinical dataset.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import (
    SAMPLE_RATE_HZ,
    SEGMENT_LENGTH,
    BinaryClass,
    PpgSegment,
    make_record,
)

# pulse-train fundamentals per class, Hz
CLASS_FUNDAMENTALS = {BinaryClass.PRE_HYPERTENSION: 1.5, BinaryClass.HYPERTENSION: 3.6}
# representative blood pressures so manifest labels derive consistently
CLASS_BP = {BinaryClass.PRE_HYPERTENSION: (115.0, 75.0), BinaryClass.HYPERTENSION: (165.0, 102.0)}
HARMONIC_WEIGHTS = (1.0, 0.5, 0.25)
NOISE_STD = 0.15


def synth_signal(label: BinaryClass, rng) -> np.ndarray:
    """One noisy multi-harmonic pulse segment with randomized phase/amplitude."""
    t = np.arange(SEGMENT_LENGTH) / SAMPLE_RATE_HZ
    f0 = CLASS_FUNDAMENTALS[label] * rng.uniform(0.92, 1.08)
    phase = rng.uniform(0, 2 * np.pi)
    amp = rng.uniform(0.8, 1.2)
    x = np.zeros(SEGMENT_LENGTH)
    for k, w in enumerate(HARMONIC_WEIGHTS, start=1):
        x += w * np.sin(2 * np.pi * k * f0 * t + k * phase)
    x *= amp
    x += NOISE_STD * rng.standard_normal(SEGMENT_LENGTH)
    return x


def make_synthetic_corpus(n_segments: int, seed: int = 0):
    """Balanced in-memory corpus: (signals (n, 2100), labels (n,), subject ids).

    One synthetic subject per segment; labels alternate so any contiguous
    split stays class-balanced.
    """
    rng = np.random.default_rng(seed)
    signals = np.empty((n_segments, SEGMENT_LENGTH))
    labels = np.empty(n_segments, dtype=int)
    subjects = []
    for i in range(n_segments):
        label = BinaryClass.PRE_HYPERTENSION if i % 2 == 0 else BinaryClass.HYPERTENSION
        signals[i] = synth_signal(label, rng)
        labels[i] = 0 if label is BinaryClass.PRE_HYPERTENSION else 1
        subjects.append(f"synth{i:04d}")
    return signals, labels, subjects


def write_synthetic_dataset(out_dir, n_segments: int, seed: int = 0) -> Path:
    """Materialize a synthetic corpus as manifest + sample files; returns the
    manifest path."""
    out_dir = Path(out_dir)
    seg_dir = out_dir / "segments"
    seg_dir.mkdir(parents=True, exist_ok=True)
    signals, labels, subjects = make_synthetic_corpus(n_segments, seed)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "segment_index", "sample_file", "sbp_mmhg", "dbp_mmhg"])
        for i, (sig, lab, subj) in enumerate(zip(signals, labels, subjects)):
            label = BinaryClass.PRE_HYPERTENSION if lab == 0 else BinaryClass.HYPERTENSION
            sbp, dbp = CLASS_BP[label]
            fname = f"segments/{subj}_1.txt"
            (out_dir / fname).write_text("\n".join(repr(float(v)) for v in sig))
            writer.writerow([subj, 1, fname, sbp, dbp])
    return manifest


def corpus_as_segments(signals, labels, subjects):
    """Wrap in-memory arrays as PpgSegment objects with derived records."""
    segments = []
    for sig, lab, subj in zip(signals, labels, subjects):
        label = BinaryClass.PRE_HYPERTENSION if lab == 0 else BinaryClass.HYPERTENSION
        sbp, dbp = CLASS_BP[label]
        record = make_record(subj, 1, f"{subj}.txt", sbp, dbp)
        segments.append(PpgSegment(samples=np.asarray(sig, dtype=np.float64),
                                   sample_rate_hz=SAMPLE_RATE_HZ, record=record))
    return segments
