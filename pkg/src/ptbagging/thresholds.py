"""Threshold policies and the full-potential threshold sweep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics

SWEEP_GRID = np.round(np.linspace(0.0, 1.0, 101), 2)
_KINDS = ("uniform", "prior", "f1_midpoint", "custom", "swept")


@dataclass(frozen=True)
class ThresholdPolicy:
    """How the per-class thresholds are chosen.

    ``prior`` thresholds at the training class priors (macro accuracy);
    ``f1_midpoint`` puts the minority cutoff halfway between its prior and 0.5
    (binary macro F1); ``swept`` picks the best cutoff on the data it is
    resolved against and is only meaningful as an upper bound.
    """

    kind: str = "uniform"
    lambdas: tuple[float, ...] | None = None
    metric: str = "macro_accuracy"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown threshold policy {self.kind!r}")
        if self.kind == "custom":
            if not self.lambdas or any(not l > 0 for l in self.lambdas):
                raise ValueError("custom thresholds must all be positive")
            object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        if self.kind == "swept" and self.metric not in ("macro_accuracy", "macro_f1"):
            raise ValueError("swept policy supports macro_accuracy or macro_f1")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "custom":
            out["lambdas"] = list(self.lambdas)
        if self.kind == "swept":
            out["metric"] = self.metric
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ThresholdPolicy":
        lam = obj.get("lambdas")
        return cls(obj["kind"], tuple(lam) if lam is not None else None,
                   obj.get("metric", "macro_accuracy"))


def minority_index(priors) -> int:
    """Binary minority class: the smaller prior, class 1 on an exact tie."""
    p = np.asarray(priors, dtype=float)
    if p.size != 2:
        raise ValueError("minority class is defined for binary problems only")
    return 1 if p[1] <= p[0] else 0


def cutoff_to_lambdas(t: float, minority: int = 1) -> np.ndarray:
    """Ratio-form thresholds equivalent to a minority cutoff ``t``."""
    lam = np.empty(2)
    lam[minority], lam[1 - minority] = t, 1.0 - t
    return lam


def resolve_thresholds(policy: ThresholdPolicy, priors, minority_posteriors=None,
                       labels=None) -> np.ndarray:
    """Threshold vector for ``policy`` given the training priors.

    ``swept`` additionally needs the minority posteriors and 0/1 minority
    indicator labels to sweep over.
    """
    p = np.asarray(priors, dtype=float)
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("priors must be positive and sum to 1")
    m = p.size
    if policy.kind == "uniform":
        return np.full(m, 1.0 / m)
    if policy.kind == "prior":
        return p.copy()
    if policy.kind == "custom":
        if len(policy.lambdas) != m:
            raise ValueError("custom thresholds do not match the class count")
        return np.array(policy.lambdas)
    if m != 2:
        raise ValueError(f"{policy.kind} thresholds are defined for binary problems only")
    mi = minority_index(p)
    if policy.kind == "f1_midpoint":
        return cutoff_to_lambdas((p[mi] + 0.5) / 2.0, mi)
    if minority_posteriors is None or labels is None:
        raise ValueError("swept thresholds need posteriors and labels")
    t, _, _ = threshold_sweep(minority_posteriors, labels, policy.metric)
    # t = 0 or 1 would give a zero threshold; nudge inside the open interval
    t = min(max(t, 1e-12), 1 - 1e-12)
    return cutoff_to_lambdas(t, mi)


def binary_cutoff_labels(minority_posteriors, t: float) -> np.ndarray:
    """1 (minority) where the posterior is at least ``t``, else 0."""
    return (np.asarray(minority_posteriors, dtype=float) >= t).astype(np.int64)


def _metric_value(labels, pred, metric):
    cm = metrics.confusion(labels, pred, 2)
    if metric == "macro_accuracy":
        return metrics.macro_accuracy(cm)
    if metric == "macro_f1":
        return metrics.macro_f1(cm, warn=False)
    raise ValueError(f"unknown sweep metric {metric!r}")


def threshold_sweep(minority_posteriors, true_labels, metric: str = "macro_accuracy"):
    """Evaluate ``metric`` at cutoffs 0.00, 0.01, ..., 1.00.

    ``true_labels`` are 0/1 with 1 = minority. Returns the smallest maximising
    cutoff, its value, and the (101, 2) curve of (cutoff, value).
    """
    post = np.asarray(minority_posteriors, dtype=float)
    labels = np.asarray(true_labels, dtype=np.int64)
    values = np.array([_metric_value(labels, binary_cutoff_labels(post, t), metric)
                       for t in SWEEP_GRID])
    best = int(np.argmax(values))
    return float(SWEEP_GRID[best]), float(values[best]), np.column_stack([SWEEP_GRID, values])
