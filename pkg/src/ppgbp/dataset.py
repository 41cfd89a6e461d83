"""Dataset ingestion: manifest parsing, label derivation, subject-level splits.

The on-disk layout is a CSV manifest (one row per PPG segment) plus one
whitespace-separated text file of raw samples per segment.  Labels are
derived from systolic/diastolic blood pressure via JNC7 staging and then
binarized to PreHypertension vs Hypertension.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

SEGMENT_LENGTH = 2100
SAMPLE_RATE_HZ = 1000

MANIFEST_COLUMNS = ["subject_id", "segment_index", "sample_file", "sbp_mmhg", "dbp_mmhg"]


class DatasetError(Exception):
    pass


class MissingFile(DatasetError):
    pass


class MalformedRow(DatasetError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvalidBp(DatasetError):
    pass


class WrongLength(DatasetError):
    def __init__(self, actual):
        super().__init__(f"expected {SEGMENT_LENGTH} samples, got {actual}")
        self.actual = actual


class NonNumericToken(DatasetError):
    pass


class TooFewSubjects(DatasetError):
    pass


class HypertensionStage(Enum):
    NORMAL = "Normal"
    PREHYPERTENSION = "Prehypertension"
    STAGE1 = "Stage1"
    STAGE2 = "Stage2"


class BinaryClass(Enum):
    PRE_HYPERTENSION = "PreHypertension"
    HYPERTENSION = "Hypertension"


# Class index convention used by every classifier head: PreHypertension is
# class 0, Hypertension class 1.  Vote ties therefore resolve to
# PreHypertension.
CLASS_ORDER = (BinaryClass.PRE_HYPERTENSION, BinaryClass.HYPERTENSION)


def derive_stage(sbp: float, dbp: float) -> HypertensionStage:
    """JNC7 staging; the most severe category triggered by either pressure wins."""
    if not (sbp > dbp > 0):
        raise InvalidBp(f"require sbp > dbp > 0, got sbp={sbp}, dbp={dbp}")
    if sbp >= 160 or dbp >= 100:
        return HypertensionStage.STAGE2
    if sbp >= 140 or dbp >= 90:
        return HypertensionStage.STAGE1
    if sbp >= 120 or dbp >= 80:
        return HypertensionStage.PREHYPERTENSION
    return HypertensionStage.NORMAL


def binarize(stage: HypertensionStage) -> BinaryClass:
    if stage in (HypertensionStage.NORMAL, HypertensionStage.PREHYPERTENSION):
        return BinaryClass.PRE_HYPERTENSION
    return BinaryClass.HYPERTENSION


@dataclass(frozen=True)
class SegmentRecord:
    subject_id: str
    segment_index: int
    sample_path: Path
    sbp: float
    dbp: float
    stage: HypertensionStage
    label: BinaryClass


@dataclass(frozen=True)
class PpgSegment:
    samples: np.ndarray
    sample_rate_hz: int
    record: SegmentRecord

    def __post_init__(self):
        self.samples.setflags(write=False)


@dataclass(frozen=True)
class SplitPlan:
    train: tuple
    test: tuple
    seed: int
    train_fraction: float


def make_record(subject_id, segment_index, sample_path, sbp, dbp) -> SegmentRecord:
    stage = derive_stage(sbp, dbp)
    return SegmentRecord(
        subject_id=str(subject_id),
        segment_index=int(segment_index),
        sample_path=Path(sample_path),
        sbp=float(sbp),
        dbp=float(dbp),
        stage=stage,
        label=binarize(stage),
    )


def load_manifest(path) -> list[SegmentRecord]:
    """Parse the manifest CSV into validated records.

    A row whose segment file is missing fails the whole load so experiment
    counts stay reproducible.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty manifest, header required")
        if [h.strip() for h in header] != MANIFEST_COLUMNS:
            raise MalformedRow(1, f"bad header {header!r}, expected {MANIFEST_COLUMNS}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise MalformedRow(line_no, f"expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
            subject_id, segment_index, sample_file, sbp_s, dbp_s = (f.strip() for f in row)
            try:
                segment_index = int(segment_index)
                sbp = float(sbp_s)
                dbp = float(dbp_s)
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc))
            if segment_index < 1:
                raise MalformedRow(line_no, f"segment_index must be >= 1, got {segment_index}")
            sample_path = path.parent / sample_file
            if not sample_path.is_file():
                raise MissingFile(str(sample_path))
            records.append(make_record(subject_id, segment_index, sample_path, sbp, dbp))
    return records


def load_segment(path, record: SegmentRecord | None = None) -> PpgSegment:
    """Read one whitespace-separated sample file; exactly 2100 finite values."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    tokens = path.read_text().split()
    values = np.empty(len(tokens), dtype=np.float64)
    for i, tok in enumerate(tokens):
        try:
            values[i] = float(tok)
        except ValueError:
            raise NonNumericToken(f"{path}: {tok!r}")
    if len(values) != SEGMENT_LENGTH:
        raise WrongLength(len(values))
    if not np.all(np.isfinite(values)):
        raise NonNumericToken(f"{path}: non-finite sample")
    return PpgSegment(samples=values, sample_rate_hz=SAMPLE_RATE_HZ, record=record)


def load_segments(records: list[SegmentRecord]) -> list[PpgSegment]:
    return [load_segment(r.sample_path, r) for r in records]


def split_subjects(records, train_fraction: float, seed: int) -> SplitPlan:
    """Deterministic subject-level split; all segments of a subject land on one side."""
    if not (0 < train_fraction < 1):
        raise ValueError(f"train_fraction must be in (0,1), got {train_fraction}")
    subjects = sorted({r.subject_id for r in records})
    if len(subjects) < 2:
        raise TooFewSubjects(f"need >= 2 distinct subjects, got {len(subjects)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subjects))
    n_train = int(round(train_fraction * len(subjects)))
    train = tuple(sorted(subjects[i] for i in order[:n_train]))
    test = tuple(sorted(subjects[i] for i in order[n_train:]))
    return SplitPlan(train=train, test=test, seed=seed, train_fraction=train_fraction)


def apply_split(records, plan: SplitPlan):
    train_set = set(plan.train)
    train = [r for r in records if r.subject_id in train_set]
    test = [r for r in records if r.subject_id not in train_set]
    return train, test
