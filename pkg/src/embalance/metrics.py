"""Skew-insensitive classification metrics computed from a confusion matrix."""

from __future__ import annotations

import numpy as np

from embalance.errors import DataError


def confusion(labels, predictions, C: int) -> np.ndarray:
    """``C x C`` counts; entry ``(i, j)`` is rows of true class ``i`` predicted as ``j``."""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape or labels.ndim != 1:
        raise DataError(f"length mismatch: {labels.shape} labels vs {predictions.shape} predictions")
    for name, arr in (("label", labels), ("prediction", predictions)):
        bad = np.flatnonzero((arr < 0) | (arr >= C))
        if bad.size:
            raise DataError(f"row {int(bad[0])}: {name} {int(arr[bad[0]])} outside [0, {C})")
    return np.bincount(labels * C + predictions, minlength=C * C).reshape(C, C)


def recalls(matrix) -> np.ndarray:
    matrix = np.asarray(matrix)
    support = matrix.sum(axis=1)
    missing = np.flatnonzero(support == 0)
    if missing.size:
        raise DataError(f"classes with zero support: {missing.tolist()}")
    return np.diag(matrix) / support


def bac(matrix) -> float:
    """Balanced accuracy: mean per-class recall."""
    return float(recalls(matrix).mean())


def gm(matrix) -> float:
    """Geometric mean of per-class recalls; exactly 0 if any recall is 0."""
    r = recalls(matrix)
    if np.any(r == 0):
        return 0.0
    return float(np.exp(np.log(r).mean()))


def per_class_f1(matrix) -> np.ndarray:
    """F1 per class; NaN where the class has neither support nor predictions."""
    matrix = np.asarray(matrix, dtype=np.float64)
    tp = np.diag(matrix)
    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    f1[(support == 0) & (predicted == 0)] = np.nan
    return f1


def macro_f1(matrix) -> float:
    f1 = per_class_f1(matrix)
    defined = f1[~np.isnan(f1)]
    return float(defined.mean()) if defined.size else float("nan")


def summarize(labels, predictions, C: int, digits: int = 4) -> dict:
    """BAC/GM/FM rounded for reports, plus the classes the metrics had to special-case."""
    matrix = confusion(labels, predictions, C)
    f1 = per_class_f1(matrix)
    return {
        "BAC": round(bac(matrix), digits),
        "GM": round(gm(matrix), digits),
        "FM": round(macro_f1(matrix), digits),
        "zero_recall_classes": np.flatnonzero(np.diag(matrix) == 0).tolist(),
        "f1_skipped_classes": np.flatnonzero(np.isnan(f1)).tolist(),
    }
