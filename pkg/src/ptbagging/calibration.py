"""Platt scaling of ensemble minority posteriors.

The sigmoid is fit on out-of-fold scores from an internal 3-fold CV, with
Platt's smoothed targets, by Newton's method with backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, stratified_folds
from .ensemble import BaggedEnsemble, tree_posteriors
from .thresholds import minority_index


@dataclass(frozen=True)
class PlattModel:
    """``p(s) = 1 / (1 + exp(A*s + B))``."""

    A: float
    B: float

    def __post_init__(self):
        if not (np.isfinite(self.A) and np.isfinite(self.B)):
            raise ValueError("Platt parameters must be finite")


def platt_targets(n_pos: int, n_neg: int) -> tuple[float, float]:
    return (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0)


def _objective(A, B, s, t):
    f = A * s + B
    # -[t log p + (1-t) log(1-p)] with p = 1/(1+e^f), written stably
    return float(np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-f)),
                                 (t - 1) * f + np.log1p(np.exp(f)))))


def fit_sigmoid(scores, labels, max_iter: int = 100, tol: float = 1e-8,
                ridge: float = 1e-12) -> PlattModel:
    """Regularised maximum-likelihood sigmoid fit on (score, 0/1 label) pairs.

    A fit with ``A > 0`` (scores anti-correlated with labels) is replaced by the
    best constant (``A = 0``) so calibration never reverses the score order.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=np.int64).ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    t_pos, t_neg = platt_targets(n_pos, n_neg)
    t = np.where(y == 1, t_pos, t_neg)

    def newton(fix_a: bool):
        A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
        fval = _objective(A, B, s, t)
        for _ in range(max_iter):
            f = A * s + B
            p = np.where(f >= 0, np.exp(-f) / (1 + np.exp(-f)), 1 / (1 + np.exp(f)))
            d1 = t - p  # dL/df
            d2 = p * (1 - p)
            gA, gB = float(np.dot(s, d1)), float(d1.sum())
            if fix_a:
                gA = 0.0
            if np.hypot(gA, gB) < tol:
                break
            h11 = float(np.dot(s * s, d2)) + ridge
            h22 = float(d2.sum()) + ridge
            h21 = float(np.dot(s, d2))
            if fix_a:
                dA, dB = 0.0, -gB / h22
            else:
                det = h11 * h22 - h21 * h21
                dA = -(h22 * gA - h21 * gB) / det
                dB = -(-h21 * gA + h11 * gB) / det
            gd = gA * dA + gB * dB
            step = 1.0
            while step >= 1e-10:
                nA, nB = A + step * dA, B + step * dB
                nf = _objective(nA, nB, s, t)
                if nf < fval + 1e-4 * step * gd:
                    A, B, fval = nA, nB, nf
                    break
                step /= 2
            else:
                break
        return A, B

    A, B = newton(fix_a=False)
    if A > 0:
        A, B = newton(fix_a=True)
    return PlattModel(float(A), float(B))


def apply_platt(model: PlattModel, score):
    f = model.A * np.asarray(score, dtype=float) + model.B
    out = np.where(f >= 0, np.exp(-f) / (1 + np.exp(-f)), 1 / (1 + np.exp(f)))
    return float(out) if out.ndim == 0 else out


def platt_labels(model: PlattModel, score) -> np.ndarray:
    """1 (minority) where the calibrated probability is at least 0.5."""
    return (np.asarray(apply_platt(model, score)) >= 0.5).astype(np.int64)


EnsembleBuilder = Callable[[Dataset, int], BaggedEnsemble]


def out_of_fold_tree_scores(d: Dataset, ensemble_builder: EnsembleBuilder, seed: int,
                            n_folds: int = 3) -> np.ndarray:
    """Per-tree out-of-fold minority posteriors, shape (n_trees, N).

    Averaging the first ``n`` rows gives the out-of-fold scores of an
    ``n``-tree ensemble built with the same streams.
    """
    if d.n_classes != 2:
        raise ValueError("Platt scaling is binary only")
    mi = minority_index(d.class_counts() / d.n_instances)
    ss = np.random.SeedSequence([int(seed), 0x91A7])
    fold_rng, *member_seeds = ss.spawn(n_folds + 1)
    folds = stratified_folds(d.y, n_folds, np.random.default_rng(fold_rng))
    out = None
    for f in range(n_folds):
        train, test = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        tr = d.take(train)
        if np.any(tr.class_counts() == 0):
            raise ValueError("an internal Platt fold lost a class")
        e = ensemble_builder(tr, int(member_seeds[f].generate_state(1)[0]))
        per_tree = tree_posteriors(e, d.X[test])[:, :, mi]
        if out is None:
            out = np.empty((per_tree.shape[0], d.n_instances))
        out[:, test] = per_tree
    return out


def fit_platt(d: Dataset, ensemble_builder: EnsembleBuilder, seed: int) -> PlattModel:
    """Fit the sigmoid on 3-fold out-of-fold ensemble scores of ``d``."""
    per_tree = out_of_fold_tree_scores(d, ensemble_builder, seed)
    mi = minority_index(d.class_counts() / d.n_instances)
    scores = per_tree.mean(axis=0)
    return fit_sigmoid(scores, (d.y == mi).astype(np.int64))
