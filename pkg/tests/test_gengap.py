import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_set
from embalance.errors import DataError
from embalance.gengap import (
    FeatureRanges,
    dataset_gap,
    feature_ranges,
    gap_by_outcome,
    generalization_gap,
)
from embalance.store import LabeledEmbeddingSet


def ranges_1d(lo, hi):
    return FeatureRanges(np.array([[lo]], dtype=float), np.array([[hi]], dtype=float))


def scan_ranges(ds):
    """Loop-based per-class min/max, independent of numpy reductions."""
    out = {}
    for row, label in zip(ds.features.tolist(), ds.labels.tolist()):
        lo, hi = out.setdefault(label, (list(row), list(row)))
        for j, v in enumerate(row):
            lo[j] = min(lo[j], v)
            hi[j] = max(hi[j], v)
    return out


def gap_by_hand(train_ds, test_ds, c):
    tr, te = scan_ranges(train_ds)[c], scan_ranges(test_ds)[c]
    terms = [max(0.0, a - b) for a, b in zip(tr[0], te[0])] + [max(0.0, b - a) for a, b in zip(tr[1], te[1])]
    return sum(terms) / len(terms)


class TestFeatureRanges:
    def test_two_rows(self):
        r = feature_ranges(LabeledEmbeddingSet([[0, 1], [2, -1], [9, 9]], [0, 0, 1], 2))
        np.testing.assert_array_equal(r.mins[0], [0, -1])
        np.testing.assert_array_equal(r.maxs[0], [2, 1])

    def test_single_row(self):
        r = feature_ranges(LabeledEmbeddingSet([[5, 5], [0, 0]], [0, 1], 2))
        np.testing.assert_array_equal(r.mins[0], [5, 5])
        np.testing.assert_array_equal(r.maxs[0], [5, 5])

    def test_empty_class(self):
        ds = LabeledEmbeddingSet([[0.0], [1.0]], [0, 0], 2)
        with pytest.raises(DataError, match=r"\[1\]"):
            feature_ranges(ds)
        assert feature_ranges(ds, allow_empty=True).present.tolist() == [True, False]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scan(self, seed):
        ds = random_set(np.random.default_rng(seed), n=200, d=4)
        r = feature_ranges(ds)
        for c, (lo, hi) in scan_ranges(ds).items():
            assert r.mins[c].tolist() == lo
            assert r.maxs[c].tolist() == hi
        assert np.all(r.mins <= r.maxs)


class TestGeneralizationGap:
    def test_identity(self, rng):
        ds = random_set(rng, n=80, d=3)
        report = generalization_gap(feature_ranges(ds), feature_ranges(ds))
        assert report.overall == 0 and np.all(report.per_class == 0)

    def test_hand_fixture(self):
        report = generalization_gap(ranges_1d(0, 1), ranges_1d(-0.5, 1.2))
        assert report.per_class[0] == pytest.approx(0.35, abs=1e-12)
        assert report.overall == pytest.approx(0.35, abs=1e-12)

    def test_floor(self):
        assert generalization_gap(ranges_1d(0, 1), ranges_1d(0.2, 0.9)).overall == 0

    def test_mean_over_classes_and_features(self):
        train = FeatureRanges(np.array([[0.0, 0.0], [0.0, 0.0]]), np.array([[1.0, 1.0], [1.0, 1.0]]))
        test = FeatureRanges(np.array([[-1.0, 0.0], [0.0, 0.0]]), np.array([[1.0, 1.0], [1.0, 3.0]]))
        report = generalization_gap(train, test)
        assert report.per_class.tolist() == [0.25, 0.5]
        assert report.overall == 0.375

    def test_missing_class_skipped(self):
        train = LabeledEmbeddingSet([[0.0], [1.0], [5.0]], [0, 0, 1], 2)
        test = LabeledEmbeddingSet([[2.0]], [0], 2)
        report = dataset_gap(train, test)
        assert report.skipped == [1]
        assert report.overall == 0.5
        assert json.loads(json.dumps(report.to_json())) == {"per_class": [0.5, None], "overall": 0.5, "skipped": [1]}

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_hand_evaluation(self, seed):
        g = np.random.default_rng(seed)
        train, test = random_set(g, n=60, d=3, C=3), random_set(g, n=40, d=3, C=3)
        report = dataset_gap(train, test)
        for c in range(3):
            assert report.per_class[c] == pytest.approx(gap_by_hand(train, test, c), abs=1e-12)


def _perturbed(seed):
    g = np.random.default_rng(seed)
    d = int(g.integers(1, 6))
    tr_lo = g.normal(size=d)
    tr_hi = tr_lo + g.uniform(0, 3, size=d)
    te_lo = g.normal(size=d)
    te_hi = te_lo + g.uniform(0, 3, size=d)
    return g, FeatureRanges(tr_lo[None], tr_hi[None]), FeatureRanges(te_lo[None], te_hi[None])


class TestGapProperties:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_monotone(self, seed):
        g, train, test = _perturbed(seed)
        base = generalization_gap(train, test).per_class[0]
        j = int(g.integers(train.mins.shape[1]))
        grow = float(g.uniform(0, 2))
        wider = FeatureRanges(test.mins.copy(), test.maxs.copy())
        wider.maxs[0, j] = max(test.maxs[0, j], train.maxs[0, j]) + grow
        assert generalization_gap(train, wider).per_class[0] >= base
        inside = FeatureRanges(test.mins.copy(), test.maxs.copy())
        inside.mins[0, j] = max(test.mins[0, j], train.mins[0, j])
        assert generalization_gap(train, inside).per_class[0] <= base
        assert base >= 0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_translation_invariant(self, seed):
        g = np.random.default_rng(seed)
        d = int(g.integers(1, 6))
        train, test = random_set(g, n=50, d=d, C=3), random_set(g, d=d, C=3)
        shift = g.normal(size=d) * 10
        moved = dataset_gap(LabeledEmbeddingSet(train.features + shift, train.labels, 3),
                            LabeledEmbeddingSet(test.features + shift, test.labels, 3))
        np.testing.assert_allclose(moved.per_class, dataset_gap(train, test).per_class, atol=1e-9)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_subset_has_zero_gap(self, seed):
        g = np.random.default_rng(seed)
        train = random_set(g, n=60, C=3)
        rows = np.concatenate([np.flatnonzero(train.labels == c)[:1] for c in range(3)] +
                              [g.choice(train.n, size=10)])
        assert np.all(dataset_gap(train, train.subset(rows)).per_class == 0)


class TestGapByOutcome:
    def setup_method(self):
        self.train = LabeledEmbeddingSet([[0.0], [1.0], [10.0], [11.0]], [0, 0, 1, 1], 2)
        self.test = LabeledEmbeddingSet([[0.5], [0.8], [10.5], [5.0]], [0, 0, 1, 1], 2)

    def test_perfect_predictions(self):
        out = gap_by_outcome(self.train, self.test, self.test.labels)
        assert out["gap_fp"].skipped == [0, 1]
        assert np.isnan(out["gap_fp"].overall)

    def test_all_wrong(self):
        out = gap_by_outcome(self.train, self.test, 1 - self.test.labels)
        assert out["gap_tp"].skipped == [0, 1]

    def test_fp_gap_exceeds_tp_gap(self):
        # row 3 (label 1 at x=5) is predicted 0: it sits 4 beyond class 0's train max of 1
        preds = np.array([0, 0, 1, 0])
        out = gap_by_outcome(self.train, self.test, preds)
        assert out["gap_tp"].overall == 0
        assert out["gap_fp"].per_class[0] == pytest.approx((0 + 4.0) / 2)
        assert out["gap_fp"].skipped == [1]
        assert out["gap_fp"].overall > out["gap_tp"].overall

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            gap_by_outcome(self.train, self.test, [0, 1])
