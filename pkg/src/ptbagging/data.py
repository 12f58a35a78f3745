"""Datasets: representation, CSV/ARFF ingestion, preprocessing, CV splits and
a synthetic Gaussian generator with closed-form Bayes posteriors."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp


class DataError(ValueError):
    """Raised for malformed files or datasets that violate the Dataset contract."""


@dataclass(frozen=True)
class Attribute:
    """A single input attribute. ``categories is None`` means numeric."""

    name: str
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.categories is not None:
            if len(self.categories) == 0:
                raise DataError(f"nominal attribute {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise DataError(f"nominal attribute {self.name!r} has duplicate categories")

    @property
    def is_nominal(self) -> bool:
        return self.categories is not None

    def to_dict(self) -> dict:
        if self.categories is None:
            return {"name": self.name, "kind": "numeric"}
        return {"name": self.name, "kind": "nominal", "categories": list(self.categories)}

    @classmethod
    def from_dict(cls, obj: dict) -> "Attribute":
        if obj["kind"] == "numeric":
            return cls(obj["name"])
        return cls(obj["name"], tuple(obj["categories"]))


class Dataset:
    """Instances ``X`` (N x d floats; nominal values stored as category index,
    missing as NaN), integer ``y`` in ``0..m-1`` and the class names.

    Instances are immutable: the arrays are flagged read-only.
    """

    def __init__(self, attributes, X, y, class_names):
        self.attributes = tuple(attributes)
        X = np.array(X, dtype=float, copy=True)
        y = np.array(y, dtype=np.int64, copy=True)
        if X.ndim == 1 and len(self.attributes) == 0:
            X = X.reshape(len(y), 0)
        if X.ndim != 2 or X.shape[1] != len(self.attributes):
            raise DataError("row length does not match attribute count")
        if X.shape[0] != y.shape[0]:
            raise DataError("instance and label counts differ")
        self.class_names = tuple(str(c) for c in class_names)
        if len(self.class_names) == 0:
            raise DataError("no classes")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError("class index out of range")
        for j, att in enumerate(self.attributes):
            if att.is_nominal:
                col = X[:, j]
                col = col[~np.isnan(col)]
                if col.size and (
                    np.any(col != np.floor(col)) or col.min() < 0 or col.max() >= len(att.categories)
                ):
                    raise DataError(f"invalid nominal value in attribute {att.name!r}")
        X.flags.writeable = False
        y.flags.writeable = False
        self.X = X
        self.y = y

    @property
    def n_instances(self) -> int:
        return self.X.shape[0]

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def nominal_mask(self) -> np.ndarray:
        return np.array([a.is_nominal for a in self.attributes], dtype=bool)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def take(self, idx) -> "Dataset":
        """Subset (or resample, with repeats) by row indices, keeping the schema."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.attributes, self.X[idx], self.y[idx], self.class_names)

    def with_rows(self, X, y) -> "Dataset":
        return Dataset(self.attributes, X, y, self.class_names)

    def validate(self) -> "Dataset":
        """Check the full contract, including that every class is present."""
        if np.isnan(self.X).any():
            raise DataError("dataset contains missing values")
        if np.any(self.class_counts() == 0):
            raise DataError("degenerate class structure: a class has no instances")
        return self

    def __len__(self):
        return self.n_instances

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.attributes == other.attributes
            and self.class_names == other.class_names
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X, equal_nan=True)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"Dataset(N={self.n_instances}, d={self.n_attributes}, "
            f"classes={list(self.class_names)})"
        )


# ---------------------------------------------------------------------------
# CSV

def _parse_real(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _encode_labels(raw: Sequence[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    names: dict[str, int] = {}
    y = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw):
        y[i] = names.setdefault(v, len(names))
    return y, tuple(names)


def _check_classes(y, class_names):
    if len(class_names) < 2:
        raise DataError("degenerate class structure: fewer than two classes")


def load_csv(path, label_column: str | int = -1) -> Dataset:
    """Read a header-first CSV file into a :class:`Dataset`.

    A column is numeric iff every non-empty cell parses as a real; otherwise
    it is nominal with categories in first-appearance order. Empty cells are
    missing values (NaN). Classes are indexed by first appearance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{i}: ragged row ({len(r)} cells, expected {len(header)})")
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} missing")
        lab = header.index(label_column)
    else:
        lab = int(label_column)
        if not -len(header) <= lab < len(header):
            raise DataError(f"{path}: label column {label_column} missing")
        lab %= len(header)

    raw_labels = [r[lab].strip() for r in body]
    if any(v == "" for v in raw_labels):
        raise DataError(f"{path}: missing class label")
    y, class_names = _encode_labels(raw_labels)
    _check_classes(y, class_names)

    attributes, columns = [], []
    for j, name in enumerate(header):
        if j == lab:
            continue
        cells = [r[j].strip() for r in body]
        parsed = [None if c == "" else _parse_real(c) for c in cells]
        if all(p is not None for p, c in zip(parsed, cells) if c != ""):
            attributes.append(Attribute(name))
            columns.append([math.nan if p is None else p for p in parsed])
        else:
            cats: dict[str, int] = {}
            for c in cells:
                if c != "":
                    cats.setdefault(c, len(cats))
            attributes.append(Attribute(name, tuple(cats)))
            columns.append([math.nan if c == "" else float(cats[c]) for c in cells])
    X = np.array(columns, dtype=float).T.reshape(len(body), len(attributes))
    return Dataset(attributes, X, y, class_names)


def _format_value(att: Attribute, v: float) -> str:
    if math.isnan(v):
        return ""
    if att.is_nominal:
        return att.categories[int(v)]
    return repr(float(v))


def write_csv(d: Dataset, path, label_name: str = "class") -> None:
    """Write ``d`` so that :func:`load_csv` reads back an identical Dataset."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([a.name for a in d.attributes] + [label_name])
        for row, lab in zip(d.X, d.y):
            w.writerow([_format_value(a, v) for a, v in zip(d.attributes, row)]
                       + [d.class_names[lab]])


def read_instances(path, attributes: Sequence[Attribute]) -> tuple[np.ndarray, dict[str, list[str]]]:
    """Encode the rows of a CSV file against an existing attribute schema.

    Columns are matched by header name; columns not in the schema are returned
    verbatim in the second element (used to carry a label column through).
    """
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{i}: ragged row")
    X = np.empty((len(body), len(attributes)))
    for j, att in enumerate(attributes):
        if att.name not in header:
            raise DataError(f"{path}: attribute column {att.name!r} missing")
        col = header.index(att.name)
        for i, r in enumerate(body):
            c = r[col].strip()
            if c == "":
                X[i, j] = math.nan
            elif att.is_nominal:
                if c not in att.categories:
                    raise DataError(f"{path}: undeclared value {c!r} for {att.name!r}")
                X[i, j] = att.categories.index(c)
            else:
                v = _parse_real(c)
                if v is None:
                    raise DataError(f"{path}: non-numeric value {c!r} for {att.name!r}")
                X[i, j] = v
    names = {a.name for a in attributes}
    extra = {h: [r[k].strip() for r in body] for k, h in enumerate(header) if h not in names}
    return X, extra


# ---------------------------------------------------------------------------
# ARFF / KEEL

_ATTR_RE = re.compile(r"^@attribute\s+('(?:[^']*)'|\"(?:[^\"]*)\"|\S+)\s+(.*)$", re.IGNORECASE)


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


def _split_values(line: str) -> list[str]:
    return [_unquote(v) for v in next(csv.reader([line], quotechar="'", skipinitialspace=True))]


def _names_list(rest: str) -> list[str]:
    return [_unquote(v) for v in rest.split(",") if v.strip()]


def load_arff(path) -> Dataset:
    """Read an ARFF file, honouring KEEL ``@inputs``/``@outputs`` declarations.

    ``?`` marks a missing value; such rows survive loading and are dropped by
    :func:`preprocess`.
    """
    path = Path(path)
    decls: list[tuple[str, tuple[str, ...] | None]] = []
    inputs = outputs = None
    data_lines: list[tuple[int, str]] = []
    in_data = False
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                data_lines.append((lineno, line))
                continue
            low = line.lower()
            if low.startswith("@relation"):
                continue
            if low.startswith("@attribute"):
                m = _ATTR_RE.match(line)
                if not m:
                    raise DataError(f"{path}:{lineno}: malformed @attribute line")
                name, typ = _unquote(m.group(1)), m.group(2).strip()
                if typ.startswith("{"):
                    if not typ.endswith("}"):
                        raise DataError(f"{path}:{lineno}: unterminated nominal declaration")
                    cats = tuple(_split_values(typ[1:-1])) if typ[1:-1].strip() else ()
                    decls.append((name, cats))
                else:
                    kind = typ.split()[0].split("[")[0].lower()
                    if kind not in ("real", "integer", "numeric"):
                        raise DataError(f"{path}:{lineno}: unsupported attribute type {kind!r}")
                    decls.append((name, None))
            elif low.startswith("@inputs"):
                inputs = _names_list(line[len("@inputs"):])
            elif low.startswith("@outputs") or low.startswith("@output"):
                outputs = _names_list(line.split(None, 1)[1] if " " in line else "")
            elif low.startswith("@data"):
                in_data = True
            else:
                raise DataError(f"{path}:{lineno}: malformed header line")
    if not in_data or not decls:
        raise DataError(f"{path}: malformed header (missing @attribute or @data)")

    names = [n for n, _ in decls]
    if outputs:
        if outputs[0] not in names:
            raise DataError(f"{path}: @outputs names unknown attribute {outputs[0]!r}")
        cls_idx = names.index(outputs[0])
    else:
        cls_idx = len(decls) - 1
    if inputs is not None:
        unknown = [n for n in inputs if n not in names]
        if unknown:
            raise DataError(f"{path}: @inputs names unknown attributes {unknown}")
        in_idx = [names.index(n) for n in inputs]
    else:
        in_idx = [j for j in range(len(decls)) if j != cls_idx]

    rows, raw_labels = [], []
    for lineno, line in data_lines:
        if line.startswith("{"):
            raise DataError(f"{path}:{lineno}: sparse rows are not supported")
        vals = _split_values(line)
        if len(vals) != len(decls):
            raise DataError(f"{path}:{lineno}: row has {len(vals)} values, expected {len(decls)}")
        lab = vals[cls_idx]
        if lab == "?":
            raise DataError(f"{path}:{lineno}: missing class label")
        cls_cats = decls[cls_idx][1]
        if cls_cats is not None and lab not in cls_cats:
            raise DataError(f"{path}:{lineno}: undeclared class value {lab!r}")
        raw_labels.append(lab)
        row = []
        for j in in_idx:
            v, cats = vals[j], decls[j][1]
            if v == "?":
                row.append(math.nan)
            elif cats is None:
                f = _parse_real(v)
                if f is None:
                    raise DataError(f"{path}:{lineno}: non-numeric value {v!r} for {names[j]!r}")
                row.append(f)
            else:
                if v not in cats:
                    raise DataError(f"{path}:{lineno}: undeclared nominal value {v!r} for {names[j]!r}")
                row.append(float(cats.index(v)))
        rows.append(row)

    y, class_names = _encode_labels(raw_labels)
    _check_classes(y, class_names)
    attributes = [Attribute(names[j], decls[j][1]) for j in in_idx]
    X = np.array(rows, dtype=float).reshape(len(rows), len(attributes))
    return Dataset(attributes, X, y, class_names)


def load_dataset(path, format: str | None = None, label_column: str | int = -1) -> Dataset:
    """Dispatch on ``format`` (or the file suffix: ``.arff``/``.dat`` are ARFF)."""
    path = Path(path)
    fmt = (format or ("arff" if path.suffix.lower() in (".arff", ".dat") else "csv")).lower()
    if fmt == "arff":
        return load_arff(path)
    if fmt == "csv":
        return load_csv(path, label_column)
    raise DataError(f"unknown dataset format {format!r}")


# ---------------------------------------------------------------------------
# preprocessing and priors

def preprocess(d: Dataset) -> Dataset:
    """Drop incomplete rows, then attributes that are constant over the rest."""
    complete = ~np.isnan(d.X).any(axis=1)
    if not complete.any():
        raise DataError("preprocess dropped every row")
    X, y = d.X[complete], d.y[complete]
    if np.any(np.bincount(y, minlength=d.n_classes) == 0):
        raise DataError("a class vanished after dropping incomplete rows")
    keep = [j for j in range(d.n_attributes) if np.any(X[:, j] != X[0, j])]
    if complete.all() and len(keep) == d.n_attributes:
        return d
    return Dataset([d.attributes[j] for j in keep], X[:, keep], y, d.class_names)


def class_priors(d: Dataset) -> np.ndarray:
    """Empirical class frequencies ``count_k / N``."""
    if d.n_instances == 0:
        raise DataError("empty dataset has no priors")
    return d.class_counts() / d.n_instances


# ---------------------------------------------------------------------------
# cross-validation

@dataclass(frozen=True)
class CvPlan:
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    repetitions: int
    folds_per_rep: int

    def __iter__(self):
        for i, (tr, te) in enumerate(self.folds):
            yield i // self.folds_per_rep, i % self.folds_per_rep, tr, te


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per instance: each class shuffled, then dealt round-robin so
    the lowest fold ids receive the extra instances."""
    fold = np.empty(len(y), dtype=np.int64)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        fold[rng.permutation(idx)] = np.arange(len(idx)) % k
    return fold


def five_by_two_cv(d: Dataset, seed: int) -> CvPlan:
    """Five independent stratified 2-fold splits (ten train/test pairs)."""
    counts = d.class_counts()
    if np.any(counts < 2):
        raise DataError("five_by_two_cv needs at least 2 instances of every class")
    rng = np.random.default_rng(seed)
    folds = []
    for _ in range(5):
        f = stratified_folds(d.y, 2, rng)
        a, b = np.flatnonzero(f == 0), np.flatnonzero(f == 1)
        folds += [(b, a), (a, b)]
    return CvPlan(tuple(folds), repetitions=5, folds_per_rep=2)


# ---------------------------------------------------------------------------
# synthetic data

def default_means(m: int) -> np.ndarray:
    """1-D class means spaced two units apart and centred on zero (±1 for m=2)."""
    return (2.0 * np.arange(m) - (m - 1)).reshape(m, 1)


def gen_gaussian_imbalanced(
    n: int,
    prior,
    means=None,
    cov_scale: float = 1.0,
    seed: int = 0,
) -> tuple[Dataset, Callable[[np.ndarray], np.ndarray]]:
    """Sample a mixture of isotropic Gaussians and return its Bayes posterior.

    Parameters
    ----------
    n : int
        Number of instances.
    prior : sequence of float
        Mixing weights (class priors).
    means : array_like, shape (m, dim), optional
        Class means; defaults to :func:`default_means`.
    cov_scale : float
        Common per-coordinate variance.
    seed : int
        RNG seed.

    Returns
    -------
    dataset : Dataset
    oracle : callable
        Maps an instance (dim,) or batch (N, dim) to exact posteriors P(y=k|x).
    """
    prior = np.asarray(prior, dtype=float)
    if np.any(prior <= 0) or abs(prior.sum() - 1) > 1e-12:
        raise ValueError("prior must be positive and sum to 1")
    if cov_scale <= 0:
        raise ValueError("cov_scale must be positive")
    m = len(prior)
    means = default_means(m) if means is None else np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means.reshape(m, 1)
    if means.shape[0] != m:
        raise ValueError("one mean per class required")
    if len({tuple(r) for r in means}) != m:
        raise ValueError("class means must be distinct")
    dim = means.shape[1]
    rng = np.random.default_rng(seed)
    y = rng.choice(m, size=n, p=prior)
    X = means[y] + rng.normal(scale=math.sqrt(cov_scale), size=(n, dim))
    log_prior = np.log(prior)

    def oracle(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        x = x.reshape(-1, dim)
        sq = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        logits = log_prior[None, :] - sq / (2 * cov_scale)
        post = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        post /= post.sum(axis=1, keepdims=True)
        return post[0] if single else post

    atts = [Attribute(f"x{j}") for j in range(dim)]
    return Dataset(atts, X, y, [str(k) for k in range(m)]), oracle
