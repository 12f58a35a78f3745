"""Training-set resampling mechanisms for the bagging learner.

Every sampler takes a :class:`~ptbagging.data.Dataset` and a numpy
``Generator`` and returns a new Dataset with the same schema. Randomness comes
only from the generator, so replaying a stream reproduces the sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset


def learner_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for learner ``index``; does not depend on scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def _binary_roles(d: Dataset, name: str) -> tuple[int, int]:
    if d.n_classes != 2:
        raise ValueError(f"{name} requires a binary dataset, got {d.n_classes} classes")
    c = d.class_counts()
    # equal counts: class 1 plays the minority
    return (1, 0) if c[1] <= c[0] else (0, 1)


def _index_sets(d: Dataset) -> list[np.ndarray]:
    return [np.flatnonzero(d.y == k) for k in range(d.n_classes)]


def bootstrap(d: Dataset, rng: np.random.Generator) -> Dataset:
    """N draws with replacement; the natural class distribution is kept in expectation."""
    return d.take(rng.integers(0, d.n_instances, size=d.n_instances))


def exactly_balanced(d: Dataset, rng: np.random.Generator) -> Dataset:
    """All minority instances plus as many majority instances drawn without replacement."""
    mn, mj = _binary_roles(d, "exactly_balanced")
    idx = _index_sets(d)
    maj = rng.choice(idx[mj], size=len(idx[mn]), replace=False)
    return d.take(np.concatenate([idx[mn], maj]))


def roughly_balanced_size(n_min: int, rng: np.random.Generator) -> int:
    """Majority sample size: failures before the n_min-th success at p=1/2, at least 1."""
    return max(1, int(rng.negative_binomial(n_min, 0.5)))


def roughly_balanced(d: Dataset, rng: np.random.Generator) -> Dataset:
    """Minority kept whole; majority size negative-binomial with mean n_min, drawn with replacement."""
    mn, mj = _binary_roles(d, "roughly_balanced")
    idx = _index_sets(d)
    s = roughly_balanced_size(len(idx[mn]), rng)
    return d.take(np.concatenate([idx[mn], rng.choice(idx[mj], size=s, replace=True)]))


def random_oversample(d: Dataset, rng: np.random.Generator) -> Dataset:
    """Duplicate random minority rows until both classes have the majority count."""
    mn, mj = _binary_roles(d, "random_oversample")
    idx = _index_sets(d)
    extra = rng.choice(idx[mn], size=len(idx[mj]) - len(idx[mn]), replace=True)
    return d.take(np.concatenate([np.arange(d.n_instances), extra]))


def _mixed_distances(X: np.ndarray, nominal: np.ndarray, scale: np.ndarray) -> np.ndarray:
    num = ~nominal
    D = np.zeros((X.shape[0], X.shape[0]))
    if num.any():
        Z = X[:, num] * scale[num]
        D += cdist(Z, Z, "sqeuclidean")
    for j in np.flatnonzero(nominal):
        D += X[:, None, j] != X[None, :, j]
    return np.sqrt(D)


def smote(
    d: Dataset,
    oversample_pct: float = 500.0,
    neighbors: int = 5,
    rng: np.random.Generator | None = None,
) -> Dataset:
    """SMOTE oversampling of the minority followed by majority undersampling to balance.

    ``floor(oversample_pct / 100) * n_min`` synthetic rows are generated by
    interpolating numeric attributes between a random minority seed and one of
    its ``neighbors`` nearest minority neighbours; nominal values are copied from
    the seed. The distance is Euclidean over numeric attributes standardised by
    their standard deviation in ``d`` plus one per nominal mismatch. Neighbour
    ties are broken by instance index.

    The majority is then drawn without replacement down to the new minority
    total; if the majority is smaller than that total, all of it is kept and
    the remainder is drawn with replacement.
    """
    if rng is None:
        raise TypeError("smote requires an rng")
    if oversample_pct <= 0 or neighbors < 1:
        raise ValueError("oversample_pct must be > 0 and neighbors >= 1")
    mn, mj = _binary_roles(d, "smote")
    idx = _index_sets(d)
    min_idx, maj_idx = idx[mn], idx[mj]
    n_min = len(min_idx)
    if n_min < 2:
        raise ValueError("smote needs at least 2 minority instances")
    k = max(1, min(neighbors, n_min - 1))

    nominal = d.nominal_mask
    sd = d.X.std(axis=0) if d.n_instances else np.zeros(d.n_attributes)
    scale = np.divide(1.0, sd, out=np.zeros_like(sd), where=sd > 0)
    Xm = d.X[min_idx]
    D = _mixed_distances(Xm, nominal, scale)
    np.fill_diagonal(D, np.inf)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]

    n_syn = int(math.floor(oversample_pct / 100.0)) * n_min
    seeds = rng.integers(0, n_min, size=n_syn)
    nbrs = nn[seeds, rng.integers(0, k, size=n_syn)]
    gap = rng.random(size=(n_syn, 1))
    base, other = Xm[seeds], Xm[nbrs]
    syn = base + gap * (other - base)
    syn[:, nominal] = base[:, nominal]

    target = n_min + n_syn
    if target <= len(maj_idx):
        maj = rng.choice(maj_idx, size=target, replace=False)
    else:
        maj = np.concatenate([maj_idx, rng.choice(maj_idx, size=target - len(maj_idx), replace=True)])
    X = np.vstack([d.X[min_idx], syn, d.X[maj]])
    y = np.concatenate([np.full(target, mn), np.full(target, mj)])
    return d.with_rows(X, y)


def under_over_target(n_maj: int, a: float) -> int:
    return max(1, int(math.floor(a / 100.0 * n_maj + 0.5)))


def under_over(d: Dataset, a: float, rng: np.random.Generator) -> Dataset:
    """Resample every class to ``round(a/100 * n_majority)`` instances.

    Larger classes are undersampled without replacement, smaller ones
    oversampled with replacement. ``a=100`` is over-bagging.
    """
    if not 0 < a <= 100:
        raise ValueError("a must lie in (0, 100]")
    idx = _index_sets(d)
    t = under_over_target(max(len(i) for i in idx), a)
    parts = []
    for i in idx:
        if len(i) == 0:
            continue
        if len(i) > t:
            parts.append(rng.choice(i, size=t, replace=False))
        elif len(i) < t:
            parts.append(rng.choice(i, size=t, replace=True))
        else:
            parts.append(i)
    return d.take(np.concatenate(parts))


def under_to_smallest(d: Dataset, rng: np.random.Generator) -> Dataset:
    """Undersample every class without replacement to the smallest class size."""
    idx = [i for i in _index_sets(d) if len(i)]
    n_min = min(len(i) for i in idx)
    return d.take(np.concatenate([rng.choice(i, size=n_min, replace=False) for i in idx]))


_KINDS = {
    "bootstrap": (),
    "exactly_balanced": (),
    "roughly_balanced": (),
    "random_oversample": (),
    "smote": ("oversample_pct", "neighbors"),
    "under_over": ("a",),
    "under_to_smallest": (),
}


@dataclass(frozen=True)
class SamplerSpec:
    """Which sampler feeds each base learner, and its parameters.

    ``params`` is stored as a sorted tuple of pairs so specs are hashable and
    can be used to group methods that share an ensemble.
    """

    kind: str = "bootstrap"
    params: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        p = dict(self.params)
        unknown = set(p) - set(_KINDS[self.kind])
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        if self.kind == "smote":
            p.setdefault("oversample_pct", 500.0)
            p.setdefault("neighbors", 5)
            if p["oversample_pct"] <= 0 or p["neighbors"] < 1:
                raise ValueError("smote needs oversample_pct > 0 and neighbors >= 1")
        if self.kind == "under_over":
            if "a" not in p or not 0 < p["a"] <= 100:
                raise ValueError("under_over needs a in (0, 100]")
        object.__setattr__(self, "params", tuple(sorted(p.items())))

    @classmethod
    def make(cls, kind: str, **params) -> "SamplerSpec":
        return cls(kind, tuple(params.items()))

    def sample(self, d: Dataset, rng: np.random.Generator) -> Dataset:
        p = dict(self.params)
        if self.kind == "bootstrap":
            return bootstrap(d, rng)
        if self.kind == "exactly_balanced":
            return exactly_balanced(d, rng)
        if self.kind == "roughly_balanced":
            return roughly_balanced(d, rng)
        if self.kind == "random_oversample":
            return random_oversample(d, rng)
        if self.kind == "smote":
            return smote(d, p["oversample_pct"], int(p["neighbors"]), rng)
        if self.kind == "under_over":
            return under_over(d, p["a"], rng)
        return under_to_smallest(d, rng)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, obj: dict) -> "SamplerSpec":
        return cls.make(obj["kind"], **obj.get("params", {}))
