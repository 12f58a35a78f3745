"""Performance measures for imbalanced classification and calibration diagnostics.

Undefined ratios (0/0) come back as NaN rather than 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class UndefinedMetricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[i, j]`` = instances of true class i predicted as class j."""

    counts: np.ndarray

    @property
    def m(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, k: int) -> int:
        return int(self.counts[k, k])

    def fn(self, k: int) -> int:
        return int(self.counts[k].sum() - self.counts[k, k])

    def fp(self, k: int) -> int:
        return int(self.counts[:, k].sum() - self.counts[k, k])

    def tn(self, k: int) -> int:
        return self.total - self.tp(k) - self.fn(k) - self.fp(k)


def confusion(labels_true, labels_pred, m: int) -> ConfusionMatrix:
    t = np.asarray(labels_true, dtype=np.int64).ravel()
    p = np.asarray(labels_pred, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError("label arrays differ in length")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= m):
        raise ValueError("label outside 0..m-1")
    return ConfusionMatrix(np.bincount(t * m + p, minlength=m * m).reshape(m, m))


def _ratio(a, b) -> float:
    return a / b if b else float("nan")


def binary_rates(cm: ConfusionMatrix, positive: int = 1) -> dict:
    """Recall (TPR), precision, TNR and FPR with ``positive`` as the positive class."""
    if cm.m != 2:
        raise ValueError("binary_rates needs a 2x2 confusion matrix")
    tp, fn, fp, tn = cm.tp(positive), cm.fn(positive), cm.fp(positive), cm.tn(positive)
    return {
        "recall": _ratio(tp, tp + fn),
        "precision": _ratio(tp, tp + fp),
        "tnr": _ratio(tn, tn + fp),
        "fpr": _ratio(fp, fp + tn),
    }


def per_class_recall(cm: ConfusionMatrix) -> np.ndarray:
    support = cm.counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm.counts) / np.maximum(support, 1), np.nan)


def macro_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall; for two classes this is (TPR + TNR) / 2."""
    r = per_class_recall(cm)
    if np.isnan(r).any():
        raise ValueError("macro accuracy is undefined when a true class is absent")
    return float(r.mean())


def f1(cm: ConfusionMatrix, positive: int = 1) -> float:
    """2TP / (2TP + FP + FN); NaN when the class never occurs nor is predicted."""
    tp, fp, fn = cm.tp(positive), cm.fp(positive), cm.fn(positive)
    return _ratio(2 * tp, 2 * tp + fp + fn)


def macro_f1(cm: ConfusionMatrix, warn: bool = True) -> float:
    """Mean of per-class F1. An undefined class F1 counts as 0 and warns."""
    if cm.total == 0:
        raise ValueError("macro F1 is undefined on an empty confusion matrix")
    scores = np.array([f1(cm, k) for k in range(cm.m)])
    if np.isnan(scores).any():
        if warn:
            warnings.warn("F1 undefined for a class with no true or predicted instances; "
                          "counted as 0", UndefinedMetricWarning, stacklevel=2)
        scores = np.nan_to_num(scores, nan=0.0)
    return float(scores.mean())


@dataclass(frozen=True)
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray
    auc: float


def pr_curve(minority_posteriors, labels) -> PrCurve:
    """Precision-recall points at every distinct score, tied scores as one block.

    ``labels`` are 0/1 with 1 = minority. The area is step-wise average
    precision, ``sum (R_n - R_{n-1}) P_n``.
    """
    s = np.asarray(minority_posteriors, dtype=float).ravel()
    y = np.asarray(labels, dtype=np.int64).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise ValueError("PR curve needs both classes present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last]
    seen = last + 1
    recall = tp / n_pos
    precision = tp / seen
    auc = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return PrCurve(recall, precision, s[last], auc)


def aucpr(minority_posteriors, labels) -> float:
    return pr_curve(minority_posteriors, labels).auc


def stratified_brier(posteriors, labels) -> tuple[np.ndarray, float]:
    """Per-class Brier score and the prior-weighted overall score.

    For class c, the mean over its instances of ``(1 - P_c)^2 + sum_{k!=c} P_k^2``.
    Classes without instances get NaN.
    """
    P = np.asarray(posteriors, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if P.ndim != 2 or P.shape[0] != y.size:
        raise ValueError("posteriors must be (N, m) matching the labels")
    target = np.zeros_like(P)
    target[np.arange(y.size), y] = 1.0
    per_instance = ((P - target) ** 2).sum(axis=1)
    m = P.shape[1]
    counts = np.bincount(y, minlength=m)
    sums = np.bincount(y, weights=per_instance, minlength=m)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    overall = float(per_instance.mean()) if y.size else float("nan")
    return per_class, overall


@dataclass(frozen=True)
class ReliabilityTable:
    """Ten equal-width bins of the minority posterior; empty bins hold NaN."""

    edges: np.ndarray
    mean_predicted: np.ndarray
    observed: np.ndarray
    count: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.count == 0

    def mean_abs_gap(self) -> float:
        ok = ~self.empty
        return float(np.mean(np.abs(self.observed[ok] - self.mean_predicted[ok])))

    def mean_signed_gap(self) -> float:
        """Mean of predicted - observed over non-empty bins (> 0: overestimation)."""
        ok = ~self.empty
        return float(np.mean(self.mean_predicted[ok] - self.observed[ok]))


def reliability_bins(minority_posteriors, labels, n_bins: int = 10) -> ReliabilityTable:
    """Bins ``[0, .1), ..., [.9, 1.0]``; only the last bin is closed on the right."""
    p = np.asarray(minority_posteriors, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    b = np.clip(np.floor(p * n_bins).astype(np.int64), 0, n_bins - 1)
    count = np.bincount(b, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_pred = np.bincount(b, weights=p, minlength=n_bins) / count
        observed = np.bincount(b, weights=y, minlength=n_bins) / count
    return ReliabilityTable(np.linspace(0, 1, n_bins + 1), mean_pred, observed, count)
