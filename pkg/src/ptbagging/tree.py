"""Unpruned C4.5-style probability estimation trees.

Induction follows C4.5: numeric attributes get binary ``x <= t`` splits at
midpoints between consecutive distinct values (threshold chosen by information
gain, see :class:`TreeParams` for the numeric refinements), nominal attributes
one multiway split. Among attributes whose split has
positive gain of at least the average gain, the highest gain ratio wins; ties
go to the lowest attribute index. Leaves keep raw class counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Attribute, Dataset

_EPS = 1e-12


@dataclass(frozen=True)
class TreeParams:
    """Induction settings.

    ``c45_split_rules`` applies C4.5's two numeric-split refinements: each side
    of a numeric split must hold at least ``clip(0.1 * n / m, min_leaf, 25)``
    instances, and the split's gain is reduced by ``log2(candidates) / n``.
    With it off, any numeric split leaving ``min_leaf`` on both sides competes.
    """

    min_leaf: int = 2
    use_laplace: bool = False
    c45_split_rules: bool = True

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


def leaf_distribution(counts, use_laplace: bool = False, m: int | None = None) -> np.ndarray:
    """Class distribution from leaf counts: ``c/sum`` or Laplace ``(c+1)/(sum+m)``.

    Works row-wise on a 2-D array of counts.
    """
    c = np.asarray(counts, dtype=float)
    m = c.shape[-1] if m is None else m
    total = c.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("leaf_distribution needs at least one instance")
    if use_laplace:
        return (c + 1.0) / (total + m)
    return c / total


def _xlogx(c):
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = c[pos] * np.log2(c[pos])
    return out


def _entropy_of_counts(counts) -> float:
    n = counts.sum()
    return float((_xlogx(n) - _xlogx(counts).sum()) / n)


def _best_numeric(Xs, ys, m, min_leaf, h_parent, c45=False):
    """Best threshold per numeric column. Returns (gain, ratio, threshold) arrays."""
    n, p = Xs.shape
    if c45:
        min_leaf = int(np.ceil(min(25.0, max(float(min_leaf), 0.1 * n / m))))
    order = np.argsort(Xs, axis=0, kind="stable")
    sv = np.take_along_axis(Xs, order, axis=0)
    sy = ys[order]
    lo, hi = min_leaf - 1, n - min_leaf  # split after sorted row i, i in [lo, hi)
    gain = np.full(p, -np.inf)
    ratio = np.full(p, -np.inf)
    thr = np.full(p, np.nan)
    if hi <= lo:
        return gain, ratio, thr
    left = np.empty((n, p, m))
    for k in range(m):
        np.cumsum(sy == k, axis=0, out=left[:, :, k])
    left = left[lo:hi]
    total = np.bincount(ys, minlength=m).astype(float)
    right = total[None, None, :] - left
    nl = np.arange(lo + 1, hi + 1, dtype=float)[:, None]
    nr = n - nl
    child = (_xlogx(nl) - _xlogx(left).sum(axis=2) + _xlogx(nr) - _xlogx(right).sum(axis=2)) / n
    g = h_parent - child
    valid = sv[lo + 1:hi + 1] > sv[lo:hi]
    g[~valid] = -np.inf
    best = np.argmax(g, axis=0)
    cols = np.arange(p)
    gain = g[best, cols]
    if c45:
        n_cand = valid.sum(axis=0)
        gain = gain - np.log2(np.maximum(n_cand, 1)) / n
        gain[n_cand == 0] = -np.inf
    ok = np.isfinite(gain)
    fl = (best + lo + 1) / n
    split_info = -(fl * np.log2(fl) + (1 - fl) * np.log2(1 - fl))
    ratio = np.where(ok, gain / split_info, -np.inf)
    a, b = sv[best + lo, cols], sv[best + lo + 1, cols]
    mid = (a + b) / 2.0
    thr = np.where(ok, np.where(mid < b, mid, a), np.nan)
    return gain, ratio, thr


def _nominal_split(vals, ys, m, n_cat, min_leaf, h_parent):
    n = len(ys)
    ct = np.bincount(vals * m + ys, minlength=n_cat * m).reshape(n_cat, m).astype(float)
    nv = ct.sum(axis=1)
    if np.count_nonzero(nv >= min_leaf) < 2:
        return -np.inf, -np.inf
    child = (_xlogx(nv).sum() - _xlogx(ct).sum()) / n
    gain = h_parent - child
    split_info = (_xlogx(float(n)) - _xlogx(nv).sum()) / n
    return gain, gain / split_info


class ProbTree:
    """A fitted tree stored as flat node arrays.

    ``feature[i] == -1`` marks a leaf. ``children[i, s]`` is the child reached
    through slot ``s`` (0 = ``<=`` and 1 = ``>`` for numeric splits, the
    category index for nominal splits), or -1 for a nominal branch that saw no
    training instances; instances routed there get node ``i``'s own counts.
    """

    def __init__(self, attributes, n_classes, feature, threshold, children, counts,
                 params: TreeParams = TreeParams()):
        self.attributes = tuple(attributes)
        self.n_classes = int(n_classes)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.children = np.asarray(children, dtype=np.int64).reshape(len(self.feature), -1)
        self.counts = np.asarray(counts, dtype=np.int64).reshape(len(self.feature), self.n_classes)
        self.params = params
        self._nominal = np.array([a.is_nominal for a in self.attributes] + [False], dtype=bool)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):  # parents precede children
            ch = self.children[i][self.children[i] >= 0]
            depth[ch] = depth[i] + 1
        return int(depth.max())

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.attributes):
            raise ValueError("instance does not match the tree's schema")
        if np.isnan(X).any():
            raise ValueError("missing values are not supported at prediction time")
        for j, a in enumerate(self.attributes):
            if a.is_nominal:
                v = X[:, j]
                if np.any((v != np.floor(v)) | (v < 0) | (v >= len(a.categories))):
                    raise ValueError(f"nominal value outside declared categories of {a.name!r}")
        return X

    def apply(self, X) -> np.ndarray:
        """Index of the node whose counts each instance receives."""
        X = self._check(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.full(X.shape[0], self.feature[0] >= 0)
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            f = self.feature[nd]
            v = X[rows, f]
            slot = np.where(self._nominal[f], v, v > self.threshold[nd]).astype(np.int64)
            child = self.children[nd, slot]
            moved = child >= 0
            node[rows[moved]] = child[moved]
            active[rows[~moved]] = False
            active[rows[moved]] = self.feature[child[moved]] >= 0
        return node

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        out = leaf_distribution(self.counts[self.apply(X)], self.params.use_laplace, self.n_classes)
        return out[0] if single else out

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            node = {"id": i, "counts": self.counts[i].tolist()}
            f = int(self.feature[i])
            if f >= 0:
                if self.attributes[f].is_nominal:
                    k = len(self.attributes[f].categories)
                    node["split"] = {"attribute": f, "kind": "nominal_multiway"}
                else:
                    k = 2
                    node["split"] = {"attribute": f, "kind": "numeric_le",
                                     "threshold": float(self.threshold[i])}
                node["children"] = [int(c) if c >= 0 else None for c in self.children[i, :k]]
            nodes.append(node)
        return {
            "schema": 1,
            "n_classes": self.n_classes,
            "params": {"min_leaf": self.params.min_leaf, "use_laplace": self.params.use_laplace,
                       "c45_split_rules": self.params.c45_split_rules},
            "attributes": [a.to_dict() for a in self.attributes],
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ProbTree":
        if obj.get("schema") != 1:
            raise ValueError("unsupported tree schema")
        atts = [Attribute.from_dict(a) for a in obj["attributes"]]
        nodes = obj["nodes"]
        width = max([2] + [len(n.get("children", [])) for n in nodes])
        feature = np.full(len(nodes), -1)
        threshold = np.full(len(nodes), np.nan)
        children = np.full((len(nodes), width), -1)
        counts = np.array([n["counts"] for n in nodes], dtype=np.int64)
        for n in nodes:
            i = n["id"]
            if "split" in n:
                feature[i] = n["split"]["attribute"]
                threshold[i] = n["split"].get("threshold", np.nan)
                for s, c in enumerate(n["children"]):
                    children[i, s] = -1 if c is None else c
        return cls(atts, obj["n_classes"], feature, threshold, children, counts,
                   TreeParams(**obj["params"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def fit_tree(d: Dataset, params: TreeParams = TreeParams()) -> ProbTree:
    """Grow an unpruned tree on ``d`` (no missing values allowed)."""
    if d.n_instances == 0:
        raise ValueError("cannot fit a tree on an empty dataset")
    X, y, m = d.X, d.y, d.n_classes
    if np.isnan(X).any():
        raise ValueError("fit_tree requires complete data; run preprocess first")
    nominal = d.nominal_mask
    num_cols = np.flatnonzero(~nominal)
    nom_cols = np.flatnonzero(nominal)
    n_cats = {j: len(d.attributes[j].categories) for j in nom_cols}
    width = max([2] + list(n_cats.values()))
    min_leaf = params.min_leaf

    feature, threshold, children, counts = [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(np.nan)
        children.append([-1] * width)
        counts.append(np.bincount(y[idx], minlength=m))
        return len(feature) - 1

    stack = [(new_node(np.arange(d.n_instances)), np.arange(d.n_instances))]
    while stack:
        node, idx = stack.pop()
        c = counts[node]
        n = len(idx)
        if np.count_nonzero(c) <= 1 or n < 2 * min_leaf:
            continue
        h = _entropy_of_counts(c)
        ys = y[idx]
        gains = np.full(d.n_attributes, -np.inf)
        ratios = np.full(d.n_attributes, -np.inf)
        thr = np.full(d.n_attributes, np.nan)
        if len(num_cols):
            g, r, t = _best_numeric(X[np.ix_(idx, num_cols)], ys, m, min_leaf, h, params.c45_split_rules)
            gains[num_cols], ratios[num_cols], thr[num_cols] = g, r, t
        for j in nom_cols:
            gains[j], ratios[j] = _nominal_split(X[idx, j].astype(np.int64), ys, m, n_cats[j],
                                                 min_leaf, h)
        cand = gains > _EPS
        if not cand.any():
            continue
        eligible = cand & (gains >= gains[cand].mean() - _EPS)
        a = int(np.argmax(np.where(eligible, ratios, -np.inf)))
        feature[node] = a
        col = X[idx, a]
        if nominal[a]:
            parts = [(s, idx[col == s]) for s in range(n_cats[a])]
        else:
            threshold[node] = thr[a]
            go_left = col <= thr[a]
            parts = [(0, idx[go_left]), (1, idx[~go_left])]
        kids = []
        for s, sub in parts:
            if len(sub):
                children[node][s] = new_node(sub)
                kids.append((children[node][s], sub))
        stack.extend(reversed(kids))

    return ProbTree(d.attributes, m, feature, threshold, children, counts, params)
