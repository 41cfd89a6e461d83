"""Confusion-matrix and metric tests with exact rational oracles."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppgbp.dataset import BinaryClass
from ppgbp.metrics import (
    ConfusionMatrix,
    Empty,
    LengthMismatch,
    compute_metrics,
    confusion,
    format_percent,
)

PRE = BinaryClass.PRE_HYPERTENSION
HYP = BinaryClass.HYPERTENSION


def metrics_oracle(tp, fp, fn, tn):
    """Independent exact-rational implementation of the five metrics."""
    def ratio(num, den):
        return Fraction(num, den) if den else None

    p = ratio(tp, tp + fp)
    r = ratio(tp, tp + fn)
    f1 = None
    if p is not None and r is not None and p + r > 0:
        f1 = 2 * p * r / (p + r)
    spec = ratio(tn, tn + fp)
    acc = ratio(tp + tn, tp + fp + fn + tn)
    return p, r, f1, spec, acc


class TestConfusion:
    def test_perfect(self):
        labels = [PRE] * 6 + [HYP] * 4
        cm = confusion(labels, labels, positive_class=PRE)
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (6, 4, 0, 0)

    def test_anti_classifier(self):
        labels = [PRE] * 6 + [HYP] * 4
        preds = [HYP] * 6 + [PRE] * 4
        cm = confusion(preds, labels, positive_class=PRE)
        assert cm.tp == 0 and cm.tn == 0
        assert cm.fp == 4 and cm.fn == 6

    def test_swap_positive_class(self):
        rng = np.random.default_rng(0)
        labels = [PRE if b else HYP for b in rng.integers(0, 2, 30)]
        preds = [PRE if b else HYP for b in rng.integers(0, 2, 30)]
        a = confusion(preds, labels, positive_class=PRE)
        b = confusion(preds, labels, positive_class=HYP)
        assert (a.tp, a.fp, a.fn, a.tn) == (b.tn, b.fn, b.fp, b.tp)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([PRE], [PRE, HYP], positive_class=PRE)

    def test_empty(self):
        with pytest.raises(Empty):
            confusion([], [], positive_class=PRE)

    def test_total_count(self):
        rng = np.random.default_rng(1)
        labels = [PRE if b else HYP for b in rng.integers(0, 2, 25)]
        preds = [PRE if b else HYP for b in rng.integers(0, 2, 25)]
        cm = confusion(preds, labels, positive_class=HYP)
        assert cm.tp + cm.fp + cm.fn + cm.tn == 25


class TestComputeMetrics:
    def test_hand_arithmetic(self):
        rep = compute_metrics(ConfusionMatrix(3, 1, 2, 4, PRE))
        assert rep.precision == 0.75
        assert rep.recall == 0.6
        assert rep.f1 == pytest.approx(2 * 0.45 / 1.35)
        assert rep.specificity == 0.8
        assert rep.accuracy == 0.7

    def test_perfect(self):
        rep = compute_metrics(ConfusionMatrix(5, 0, 0, 5, PRE))
        assert (rep.precision, rep.recall, rep.f1, rep.specificity, rep.accuracy) == (
            1.0, 1.0, 1.0, 1.0, 1.0)

    def test_zero_denominators(self):
        rep = compute_metrics(ConfusionMatrix(0, 0, 3, 7, PRE))
        assert rep.precision is None
        assert rep.f1 is None
        assert rep.accuracy == 0.7

    def test_fifty_random_tuples_exact(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            tp, fp, fn, tn = (int(v) for v in rng.integers(0, 40, 4))
            if tp + fp + fn + tn == 0:
                tn = 1
            rep = compute_metrics(ConfusionMatrix(tp, fp, fn, tn, PRE))
            p, r, f1, spec, acc = metrics_oracle(tp, fp, fn, tn)
            for got, want in [(rep.precision, p), (rep.recall, r), (rep.f1, f1),
                              (rep.specificity, spec), (rep.accuracy, acc)]:
                if want is None:
                    assert got is None
                else:
                    assert got == float(want)
            # harmonic mean is bracketed by precision and recall
            if rep.f1 is not None:
                assert min(rep.precision, rep.recall) <= rep.f1 + 1e-15
                assert rep.f1 <= max(rep.precision, rep.recall) + 1e-15

    @given(tp=st.integers(0, 50), fp=st.integers(0, 50),
           fn=st.integers(0, 50), tn=st.integers(0, 50))
    def test_class_swap_identities(self, tp, fp, fn, tn):
        if tp + fp + fn + tn == 0:
            return
        a = compute_metrics(ConfusionMatrix(tp, fp, fn, tn, PRE))
        b = compute_metrics(ConfusionMatrix(tn, fn, fp, tp, HYP))
        assert a.accuracy == b.accuracy
        # recall under one positive class equals specificity under the other
        if a.recall is not None:
            assert a.recall == b.specificity
        if a.specificity is not None:
            assert a.specificity == b.recall

    def test_values_within_unit_interval(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            tp, fp, fn, tn = (int(v) for v in rng.integers(0, 10, 4))
            if tp + fp + fn + tn == 0:
                continue
            rep = compute_metrics(ConfusionMatrix(tp, fp, fn, tn, HYP))
            for v in (rep.precision, rep.recall, rep.f1, rep.specificity, rep.accuracy):
                assert v is None or 0.0 <= v <= 1.0


class TestFormatPercent:
    def test_rounding_half_even(self):
        assert format_percent(0.71925) == "71.9"
        assert format_percent(0.10050) == "10.0"  # half rounds to even
        assert format_percent(0.10150) == "10.2"

    def test_endpoints(self):
        assert format_percent(1.0) == "100.0"
        assert format_percent(0.0) == "0.0"

    def test_undefined(self):
        assert format_percent(None) == "n/a"
