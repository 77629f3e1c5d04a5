"""Per-class feature-range envelopes and the train/test generalization gap.

For each class and feature the gap counts only how far the test extremum
lies *beyond* the training envelope::

    e_min = max(0, train_min - test_min)
    e_max = max(0, test_max - train_max)

The per-class gap is the mean of its ``2 * d`` exceedance terms and the overall
gap is the mean over classes present on both sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from embalance.errors import DataError
from embalance.store import LabeledEmbeddingSet, partition_by_class


@dataclass(frozen=True, eq=False)
class FeatureRanges:
    """Per-class ``(min, max)`` of every feature. Absent classes hold NaN rows."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.mins[:, 0])

    @property
    def class_count(self) -> int:
        return self.mins.shape[0]


@dataclass(frozen=True, eq=False)
class GapReport:
    per_class: np.ndarray
    skipped: list[int] = field(default_factory=list)

    @property
    def overall(self) -> float:
        values = self.per_class[~np.isnan(self.per_class)]
        return float(values.mean()) if values.size else float("nan")

    def to_json(self, digits: int | None = None) -> dict:
        def fmt(v):
            if np.isnan(v):
                return None
            return round(float(v), digits) if digits is not None else float(v)

        return {
            "per_class": [fmt(v) for v in self.per_class],
            "overall": fmt(self.overall),
            "skipped": list(self.skipped),
        }


def ranges_from_groups(features: np.ndarray, groups: list[np.ndarray]) -> FeatureRanges:
    """Envelope of ``features[groups[c]]`` for each ``c``; empty groups become NaN."""
    d = features.shape[1]
    mins = np.full((len(groups), d), np.nan)
    maxs = np.full((len(groups), d), np.nan)
    for c, rows in enumerate(groups):
        if len(rows):
            block = features[rows]
            mins[c] = block.min(axis=0)
            maxs[c] = block.max(axis=0)
    return FeatureRanges(mins, maxs)


def feature_ranges(dataset: LabeledEmbeddingSet, allow_empty: bool = False) -> FeatureRanges:
    """Per-class feature envelopes.

    Raises :class:`DataError` for a class with no rows unless ``allow_empty``,
    in which case that class is left NaN (and later skipped by the gap).
    """
    groups = partition_by_class(dataset)
    empty = [c for c, rows in enumerate(groups) if len(rows) == 0]
    if empty and not allow_empty:
        raise DataError(f"classes with no rows: {empty}")
    return ranges_from_groups(dataset.features, groups)


def generalization_gap(train: FeatureRanges, test: FeatureRanges) -> GapReport:
    if train.mins.shape[1] != test.mins.shape[1]:
        raise DataError(f"dimension mismatch: {train.mins.shape[1]} vs {test.mins.shape[1]}")
    C = max(train.class_count, test.class_count)
    per_class = np.full(C, np.nan)
    skipped = []
    for c in range(C):
        if c >= train.class_count or c >= test.class_count or not (train.present[c] and test.present[c]):
            skipped.append(c)
            continue
        below = np.maximum(0.0, train.mins[c] - test.mins[c])
        above = np.maximum(0.0, test.maxs[c] - train.maxs[c])
        per_class[c] = np.concatenate([below, above]).mean()
    return GapReport(per_class, skipped)


def dataset_gap(train: LabeledEmbeddingSet, test: LabeledEmbeddingSet) -> GapReport:
    """Convenience: gap between two labeled sets, skipping classes empty on either side."""
    return generalization_gap(feature_ranges(train, allow_empty=True),
                              feature_ranges(test, allow_empty=True))


def gap_by_outcome(train: LabeledEmbeddingSet, test: LabeledEmbeddingSet,
                   predictions) -> dict[str, GapReport]:
    """Split test rows by prediction outcome and measure each part against the train envelope.

    For class ``c`` the true-positive part is rows labelled and predicted ``c``;
    the false-positive part is rows predicted ``c`` with another label.
    """
    predictions = np.asarray(predictions)
    if predictions.shape != (test.n,):
        raise DataError(f"{predictions.shape[0] if predictions.ndim else 0} predictions for {test.n} test rows")
    train_ranges = feature_ranges(train, allow_empty=True)
    C = test.class_count
    tp = [np.flatnonzero((predictions == c) & (test.labels == c)) for c in range(C)]
    fp = [np.flatnonzero((predictions == c) & (test.labels != c)) for c in range(C)]
    return {
        "gap_tp": generalization_gap(train_ranges, ranges_from_groups(test.features, tp)),
        "gap_fp": generalization_gap(train_ranges, ranges_from_groups(test.features, fp)),
    }
