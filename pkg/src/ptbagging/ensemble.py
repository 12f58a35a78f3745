"""Bagged probability trees with soft voting and per-class threshold scoring."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Attribute, Dataset, class_priors
from .sampling import SamplerSpec, learner_rng
from .tree import ProbTree, TreeParams, fit_tree


@dataclass(frozen=True)
class BaggedEnsemble:
    trees: tuple[ProbTree, ...]
    sampler: SamplerSpec
    training_priors: np.ndarray
    class_names: tuple[str, ...]
    master_seed: int

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError("an ensemble needs at least one tree")
        m = {t.n_classes for t in self.trees}
        if m != {len(self.class_names)}:
            raise ValueError("trees disagree on the class count")

    @property
    def n(self) -> int:
        return len(self.trees)

    @property
    def attributes(self) -> tuple[Attribute, ...]:
        return self.trees[0].attributes

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def head(self, n: int) -> "BaggedEnsemble":
        """The first ``n`` learners: exactly the ensemble ``fit_ensemble(..., n, ...)`` would build."""
        return BaggedEnsemble(self.trees[:n], self.sampler, self.training_priors,
                              self.class_names, self.master_seed)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "sampler": self.sampler.to_dict(),
            "master_seed": self.master_seed,
            "training_priors": [float(p) for p in self.training_priors],
            "class_names": list(self.class_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "BaggedEnsemble":
        if obj.get("schema") != 1:
            raise ValueError("unsupported ensemble schema")
        return cls(
            tuple(ProbTree.from_dict(t) for t in obj["trees"]),
            SamplerSpec.from_dict(obj["sampler"]),
            np.array(obj["training_priors"], dtype=float),
            tuple(obj["class_names"]),
            int(obj["master_seed"]),
        )


def save_ensemble(e: BaggedEnsemble, path) -> None:
    Path(path).write_text(json.dumps(e.to_dict()))


def load_ensemble(path) -> BaggedEnsemble:
    return BaggedEnsemble.from_dict(json.loads(Path(path).read_text()))


def _fit_one(args):
    d, sampler, params, master_seed, i = args
    return fit_tree(sampler.sample(d, learner_rng(master_seed, i)), params)


def fit_ensemble(
    d: Dataset,
    n: int,
    sampler: SamplerSpec = SamplerSpec(),
    params: TreeParams = TreeParams(),
    master_seed: int = 0,
    n_jobs: int = 1,
) -> BaggedEnsemble:
    """Fit ``n`` trees, tree ``i`` on a sample drawn from stream ``(master_seed, i)``.

    The stored priors are those of ``d`` itself, not of the resampled sets.
    Results do not depend on ``n_jobs``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    jobs = [(d, sampler, params, master_seed, i) for i in range(n)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            trees = list(ex.map(_fit_one, jobs))
    else:
        trees = [_fit_one(j) for j in jobs]
    return BaggedEnsemble(tuple(trees), sampler, class_priors(d), d.class_names, master_seed)


def tree_posteriors(e: BaggedEnsemble, X) -> np.ndarray:
    """Per-tree class distributions, shape (n_trees, N, m)."""
    X = np.asarray(X, dtype=float).reshape(-1, len(e.attributes))
    return np.stack([t.predict_proba(X) for t in e.trees])


def average_posteriors(per_tree: np.ndarray) -> np.ndarray:
    """Mean over the tree axis, renormalised so each row sums to one."""
    p = per_tree.mean(axis=0)
    return p / p.sum(axis=-1, keepdims=True)


def ensemble_posterior(e: BaggedEnsemble, x) -> np.ndarray:
    """Soft-vote posterior for one instance (d,) or a batch (N, d)."""
    x = np.asarray(x, dtype=float)
    p = average_posteriors(tree_posteriors(e, x))
    return p[0] if x.ndim == 1 else p


TIE_RTOL = 1e-12


def predict_with_thresholds(posterior, lambdas) -> np.ndarray | int:
    """``argmax_k posterior_k / lambda_k``.

    Ties go to the tied class with the largest threshold, then to the lowest
    index. Scores within a relative ``TIE_RTOL`` of the maximum count as tied,
    so rescaling all thresholds by a constant cannot flip a decision through
    rounding. Equal thresholds reduce to plain argmax of the posterior.
    Accepts one posterior (m,) or a batch (N, m).
    """
    lam = np.asarray(lambdas, dtype=float)
    if np.any(~(lam > 0)):
        raise ValueError("thresholds must be positive")
    P = np.asarray(posterior, dtype=float)
    single = P.ndim == 1
    P = P.reshape(-1, lam.size)
    if np.all(lam == lam[0]):
        pick = P.argmax(axis=1)
        return int(pick[0]) if single else pick
    scores = P / lam
    top = scores.max(axis=1, keepdims=True)
    tied = scores >= top - TIE_RTOL * top
    # lexsort: last key primary -> descending lambda, then ascending index
    priority = np.empty(lam.size, dtype=np.int64)
    priority[np.lexsort((np.arange(lam.size), -lam))] = np.arange(lam.size)
    pick = np.argmin(np.where(tied, priority, lam.size), axis=1)
    return int(pick[0]) if single else pick


def predict_batch(e: BaggedEnsemble, X, policy) -> tuple[np.ndarray, np.ndarray]:
    """Labels and posteriors for a batch under a threshold policy resolved
    against the ensemble's training priors."""
    from .thresholds import resolve_thresholds

    X = np.asarray(X, dtype=float).reshape(-1, len(e.attributes))
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, e.n_classes))
    post = average_posteriors(tree_posteriors(e, X))
    lam = resolve_thresholds(policy, e.training_priors)
    return predict_with_thresholds(post, lam), post
