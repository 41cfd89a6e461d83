"""Confusion-matrix construction and the five derived metrics.

Zero-denominator metrics are reported as None ("n/a" in formatted output),
never silently coerced to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

from .dataset import BinaryClass


class MetricsError(Exception):
    pass


class LengthMismatch(MetricsError):
    pass


class Empty(MetricsError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: object = BinaryClass.HYPERTENSION

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    precision: float | None
    recall: float | None
    f1: float | None
    specificity: float | None
    accuracy: float | None


def confusion(predictions, labels, positive_class) -> ConfusionMatrix:
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        raise Empty("no samples to evaluate")
    tp = fp = fn = tn = 0
    for pred, lab in zip(predictions, labels):
        if lab == positive_class:
            if pred == positive_class:
                tp += 1
            else:
                fn += 1
        else:
            if pred == positive_class:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn, positive_class=positive_class)


def _ratio(num, den):
    if den == 0:
        return None
    return Fraction(num, den)


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Exact rational arithmetic; values surface as floats."""
    if cm.total == 0:
        raise Empty("empty confusion matrix")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    specificity = _ratio(cm.tn, cm.tn + cm.fp)
    accuracy = Fraction(cm.tp + cm.tn, cm.total)
    as_float = lambda x: float(x) if x is not None else None
    return MetricsReport(
        precision=as_float(precision),
        recall=as_float(recall),
        f1=as_float(f1),
        specificity=as_float(specificity),
        accuracy=as_float(accuracy),
    )


def format_percent(value: float | None) -> str:
    """Percent with one decimal, round-half-even; None renders as n/a."""
    if value is None:
        return "n/a"
    return str(Decimal(repr(value * 100)).quantize(Decimal("0.1"), ROUND_HALF_EVEN))
