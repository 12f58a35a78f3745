"""Benchmark orchestration: 5x2 CV over datasets x methods x ensemble sizes.

Work is split into cells of (dataset, repetition, fold, sampler). All methods
sharing a sampler are scored on one fitted ensemble, and every ensemble size
uses the leading trees of the largest ensemble (tree ``i`` always comes from
stream ``i``, so this is exactly the smaller ensemble). Each cell derives its
seeds from the master seed and its coordinates, so results do not depend on
the number of worker processes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import metrics as M
from . import stats
from .calibration import apply_platt, fit_sigmoid, out_of_fold_tree_scores
from .data import Dataset, class_priors, five_by_two_cv, load_dataset, preprocess
from .ensemble import average_posteriors, fit_ensemble, predict_with_thresholds, tree_posteriors
from .sampling import SamplerSpec
from .thresholds import (ThresholdPolicy, binary_cutoff_labels, minority_index,
                         resolve_thresholds, threshold_sweep)
from .tree import TreeParams

log = logging.getLogger(__name__)

CONFIG_SCHEMA = 1
DEFAULT_SIZES = (5, 10, 15, 25, 50, 100)
SCALAR_METRICS = (
    "macro_accuracy", "macro_f1", "aucpr", "brier",
    "brier_minority", "brier_majority", "recall_minority", "recall_majority",
)
POTENTIAL_METRICS = ("potential_macro_accuracy", "potential_macro_f1")
DEFAULT_METRICS = ("macro_accuracy", "macro_f1", "aucpr", "brier",
                   "recall_minority", "recall_majority")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    path: str | None = None
    format: str | None = None
    label_column: str | int = -1
    name: str | None = None
    data: Dataset | None = field(default=None, compare=False, repr=False)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.path:
            return Path(self.path).stem
        raise ConfigError("in-memory datasets need a name")

    def load(self) -> Dataset:
        d = self.data if self.data is not None else load_dataset(self.path, self.format,
                                                                 self.label_column)
        return preprocess(d).validate()

    def to_dict(self) -> dict:
        out = {"path": self.path, "label_column": self.label_column}
        if self.format:
            out["format"] = self.format
        if self.name:
            out["name"] = self.name
        return out


@dataclass(frozen=True)
class MethodSpec:
    name: str
    sampler: SamplerSpec = SamplerSpec()
    threshold: ThresholdPolicy = ThresholdPolicy()
    calibration: str = "none"

    def __post_init__(self):
        if self.calibration not in ("none", "platt"):
            raise ConfigError(f"unknown calibration {self.calibration!r}")
        if self.calibration == "platt" and self.threshold.kind != "uniform":
            raise ConfigError("Platt-calibrated methods threshold at 0.5 (uniform policy)")

    def to_dict(self) -> dict:
        return {"name": self.name, "sampler": self.sampler.to_dict(),
                "threshold": self.threshold.to_dict(), "calibration": self.calibration}

    @classmethod
    def from_dict(cls, obj: dict) -> "MethodSpec":
        return cls(obj["name"], SamplerSpec.from_dict(obj.get("sampler", {"kind": "bootstrap"})),
                   ThresholdPolicy.from_dict(obj.get("threshold", {"kind": "uniform"})),
                   obj.get("calibration", "none"))


def binary_methods(platt: bool = False) -> list[MethodSpec]:
    """PT_MA, PT_F1 and the EB, RB and SMOTE bagging baselines (plus Platt)."""
    out = [
        MethodSpec("PT_MA", SamplerSpec("bootstrap"), ThresholdPolicy("prior")),
        MethodSpec("PT_F1", SamplerSpec("bootstrap"), ThresholdPolicy("f1_midpoint")),
        MethodSpec("EB", SamplerSpec("exactly_balanced")),
        MethodSpec("RB", SamplerSpec("roughly_balanced")),
        MethodSpec("SMOTE", SamplerSpec.make("smote", oversample_pct=500.0, neighbors=5)),
    ]
    if platt:
        out.append(MethodSpec("Platt", SamplerSpec("bootstrap"), calibration="platt"))
    return out


def multiclass_methods() -> list[MethodSpec]:
    """PT_MA against UnderOver bagging (a = 10, 25, 50, 100) and undersampling to the smallest class."""
    out = [MethodSpec("PT_MA", SamplerSpec("bootstrap"), ThresholdPolicy("prior"))]
    out += [MethodSpec(f"UO{a}", SamplerSpec.make("under_over", a=float(a)))
            for a in (10, 25, 50, 100)]
    out.append(MethodSpec("U2S", SamplerSpec("under_to_smallest")))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetSpec, ...]
    methods: tuple[MethodSpec, ...]
    ensemble_sizes: tuple[int, ...] = DEFAULT_SIZES
    tree_params: TreeParams = TreeParams()
    master_seed: int = 0
    metrics: tuple[str, ...] = DEFAULT_METRICS
    sweep: bool = False
    dump_posteriors: bool = False
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "ensemble_sizes", tuple(sorted(set(int(s) for s in self.ensemble_sizes))))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if not self.datasets or not self.methods:
            raise ConfigError("need at least one dataset and one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("method names must be unique")
        labels = [d.label for d in self.datasets]
        if len(set(labels)) != len(labels):
            raise ConfigError("dataset names must be unique")
        if not self.ensemble_sizes or min(self.ensemble_sizes) < 1:
            raise ConfigError("ensemble sizes must be positive")
        unknown = set(self.metrics) - set(SCALAR_METRICS) - set(POTENTIAL_METRICS) - {"reliability"}
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def record_metrics(self) -> tuple[str, ...]:
        """Scalar metrics recorded per cell, in output order."""
        out = [m for m in SCALAR_METRICS if m in self.metrics]
        if self.sweep or any(m in self.metrics for m in POTENTIAL_METRICS):
            out += list(POTENTIAL_METRICS)
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "datasets": [d.to_dict() for d in self.datasets],
            "methods": [m.to_dict() for m in self.methods],
            "ensemble_sizes": list(self.ensemble_sizes),
            "tree_params": {"min_leaf": self.tree_params.min_leaf,
                            "use_laplace": self.tree_params.use_laplace,
                            "c45_split_rules": self.tree_params.c45_split_rules},
            "master_seed": self.master_seed,
            "metrics": list(self.metrics),
            "sweep": self.sweep,
            "dump_posteriors": self.dump_posteriors,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if obj.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {obj.get('schema')!r}")
        try:
            datasets = []
            for ds in obj["datasets"]:
                path = Path(ds["path"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                datasets.append(DatasetSpec(str(path), ds.get("format"),
                                            ds.get("label_column", -1), ds.get("name")))
            methods = obj.get("methods")
            if methods in (None, "binary"):
                methods = binary_methods()
            elif methods == "binary+platt":
                methods = binary_methods(platt=True)
            elif methods == "multiclass":
                methods = multiclass_methods()
            else:
                methods = [MethodSpec.from_dict(m) for m in methods]
            return cls(
                datasets=tuple(datasets),
                methods=tuple(methods),
                ensemble_sizes=tuple(obj.get("ensemble_sizes", DEFAULT_SIZES)),
                tree_params=TreeParams(**obj.get("tree_params", {})),
                master_seed=int(obj.get("master_seed", 0)),
                metrics=tuple(obj.get("metrics", DEFAULT_METRICS)),
                sweep=bool(obj.get("sweep", False)),
                dump_posteriors=bool(obj.get("dump_posteriors", False)),
                threads=int(obj.get("threads", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)


# ---------------------------------------------------------------------------
# results

class Record(NamedTuple):
    dataset: str
    method: str
    n_trees: int
    rep: int
    fold: int
    metric: str
    value: float


@dataclass
class PosteriorDump:
    dataset: str
    method: str
    n_trees: int
    rep: int
    fold: int
    index: np.ndarray
    labels: np.ndarray
    pred: np.ndarray
    posteriors: np.ndarray
    minority: int  # -1 for multiclass


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return "nan" if math.isnan(v) else format(float(v), ".17g")
    return str(v)


@dataclass
class ResultsTable:
    records: list[Record] = field(default_factory=list)
    dumps: list[PosteriorDump] = field(default_factory=list)
    platt: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    COLUMNS = ("dataset", "method", "n_trees", "rep", "fold", "metric", "value")

    def datasets(self) -> list[str]:
        return list(dict.fromkeys(r.dataset for r in self.records))

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.records))

    def sizes(self) -> list[int]:
        return sorted({r.n_trees for r in self.records})

    def metrics(self) -> list[str]:
        return list(dict.fromkeys(r.metric for r in self.records if r.metric != "error"))

    def select(self, metric: str, n_trees: int | None = None) -> list[Record]:
        return [r for r in self.records
                if r.metric == metric and (n_trees is None or r.n_trees == n_trees)]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.records:
                w.writerow([_fmt(v) for v in r])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(
            [{k: (None if isinstance(v, float) and math.isnan(v) else v)
              for k, v in r._asdict().items()} for r in self.records], indent=1))

    @classmethod
    def from_csv(cls, path) -> "ResultsTable":
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != cls.COLUMNS:
                raise ValueError(f"{path}: not a results table")
            recs = [Record(r["dataset"], r["method"], int(r["n_trees"]), int(r["rep"]),
                           int(r["fold"]), r["metric"], float(r["value"])) for r in reader]
        return cls(recs)

    def posteriors_to_csv(self, path) -> None:
        width = max((d.posteriors.shape[1] for d in self.dumps), default=2)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "method", "n_trees", "rep", "fold", "index", "label", "pred",
                        "minority"] + [f"p{k}" for k in range(width)])
            for d in self.dumps:
                for i in range(len(d.index)):
                    ps = [_fmt(float(p)) for p in d.posteriors[i]]
                    w.writerow([d.dataset, d.method, d.n_trees, d.rep, d.fold, int(d.index[i]),
                                int(d.labels[i]), int(d.pred[i]), d.minority]
                               + ps + [""] * (width - len(ps)))

    def read_posteriors(self, path) -> None:
        groups: dict[tuple, list] = defaultdict(list)
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:9] != ["dataset", "method", "n_trees", "rep", "fold", "index", "label",
                              "pred", "minority"]:
                raise ValueError(f"{path}: not a posterior dump")
            for row in reader:
                key = (row[0], row[1], int(row[2]), int(row[3]), int(row[4]), int(row[8]))
                groups[key].append(row)
        self.dumps = []
        for (ds, me, n, rep, fold, mi), rows in groups.items():
            ps = np.array([[float(v) for v in r[9:] if v != ""] for r in rows])
            self.dumps.append(PosteriorDump(
                ds, me, n, rep, fold,
                np.array([int(r[5]) for r in rows]), np.array([int(r[6]) for r in rows]),
                np.array([int(r[7]) for r in rows]), ps, mi))


# ---------------------------------------------------------------------------
# cell execution

def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class _Cell:
    ds_index: int
    ds_name: str
    dataset: Dataset
    rep: int
    fold: int
    train: np.ndarray
    test: np.ndarray
    sampler: SamplerSpec
    methods: list[tuple[int, MethodSpec]]
    sizes: tuple[int, ...]
    tree_params: TreeParams
    master_seed: int
    metrics: tuple[str, ...]
    dump: bool


def _score(metric_names, y, pred, post, mi, m):
    """Scalar metrics for one prediction; NaN where undefined."""
    cm = M.confusion(y, pred, m)
    out = {}
    binary = m == 2
    ind = (y == mi).astype(np.int64) if binary else None
    recalls = M.per_class_recall(cm)
    for name in metric_names:
        v = math.nan
        try:
            if name == "macro_accuracy":
                v = M.macro_accuracy(cm)
            elif name == "macro_f1":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", M.UndefinedMetricWarning)
                    v = M.macro_f1(cm)
            elif name == "brier":
                v = M.stratified_brier(post, y)[1]
            elif not binary:
                v = math.nan
            elif name == "aucpr":
                v = M.aucpr(post[:, mi], ind)
            elif name == "brier_minority":
                v = M.stratified_brier(post, y)[0][mi]
            elif name == "brier_majority":
                v = M.stratified_brier(post, y)[0][1 - mi]
            elif name == "recall_minority":
                v = recalls[mi]
            elif name == "recall_majority":
                v = recalls[1 - mi]
            elif name in POTENTIAL_METRICS:
                base = name[len("potential_"):]
                _, best, _ = threshold_sweep(post[:, mi], ind, base)
                realised = out.get(base)
                if realised is None:
                    realised = (M.macro_accuracy(cm) if base == "macro_accuracy"
                                else M.macro_f1(cm, warn=False))
                v = max(best, realised)
        except ValueError:
            v = math.nan
        out[name] = float(v)
    return out


def _run_cell(cell: _Cell):
    """Score every method of one cell.

    Returns (records, dumps, platt_params, failures) where ``failures`` maps a
    method position to its error message; a failing method does not affect
    the others sharing the ensemble. Raises if the ensemble itself fails.
    """
    d = cell.dataset
    train, test = d.take(cell.train), d.take(cell.test)
    m = d.n_classes
    priors = class_priors(train)
    mi = minority_index(priors) if m == 2 else -1
    seed = derive_seed(cell.master_seed, cell.ds_index, cell.rep, cell.fold)
    n_max = max(cell.sizes)
    ens = fit_ensemble(train, n_max, cell.sampler, cell.tree_params, seed)
    per_tree = tree_posteriors(ens, test.X)
    oof = None
    records, dumps, platt, failures = [], [], [], {}
    for n in cell.sizes:
        post = average_posteriors(per_tree[:n])
        for mpos, meth in cell.methods:
            if mpos in failures:
                continue
            try:
                if meth.calibration == "platt":
                    if m != 2:
                        raise ValueError("Platt scaling is binary only")
                    if oof is None:
                        oof = out_of_fold_tree_scores(
                            train,
                            lambda tr, s: fit_ensemble(tr, n_max, cell.sampler,
                                                       cell.tree_params, s),
                            derive_seed(seed, 1))
                    model = fit_sigmoid(oof[:n].mean(axis=0), (train.y == mi).astype(np.int64))
                    q = apply_platt(model, post[:, mi])
                    p_used = np.empty_like(post)
                    p_used[:, mi], p_used[:, 1 - mi] = q, 1.0 - q
                    pred = np.where(binary_cutoff_labels(q, 0.5) == 1, mi, 1 - mi)
                    platt.append({"dataset": cell.ds_name, "method": meth.name, "n_trees": n,
                                  "rep": cell.rep, "fold": cell.fold,
                                  "A": model.A, "B": model.B})
                else:
                    p_used = post
                    if meth.threshold.kind == "swept":
                        lam = resolve_thresholds(meth.threshold, priors, post[:, mi],
                                                 (test.y == mi).astype(np.int64))
                    else:
                        lam = resolve_thresholds(meth.threshold, priors)
                    pred = predict_with_thresholds(post, lam)
                vals = _score(cell.metrics, test.y, pred, p_used, mi, m)
            except Exception as exc:
                failures[mpos] = f"{type(exc).__name__}: {exc}"
                continue
            for k, name in enumerate(cell.metrics):
                records.append(((cell.ds_index, mpos, n, cell.rep, cell.fold, k),
                                Record(cell.ds_name, meth.name, n, cell.rep, cell.fold, name,
                                       vals[name])))
            if cell.dump:
                dumps.append(((cell.ds_index, mpos, n, cell.rep, cell.fold),
                              PosteriorDump(cell.ds_name, meth.name, n, cell.rep, cell.fold,
                                            np.asarray(cell.test), test.y.copy(),
                                            np.asarray(pred), p_used.copy(), mi)))
    # a method failing at a later size is dropped at every size
    records = [r for r in records if r[0][1] not in failures]
    dumps = [dd for dd in dumps if dd[0][1] not in failures]
    platt = [p for p in platt if p["method"] not in
             {meth.name for mpos, meth in cell.methods if mpos in failures}]
    return records, dumps, platt, failures


def _safe_run(cell: _Cell):
    try:
        return _run_cell(cell), None
    except Exception as exc:  # isolate failures per cell
        return None, f"{type(exc).__name__}: {exc}"


def run_benchmark(cfg: ExperimentConfig) -> ResultsTable:
    """Run the 5x2 CV protocol for every dataset, method and ensemble size."""
    metrics = cfg.record_metrics
    groups: dict[SamplerSpec, list[tuple[int, MethodSpec]]] = {}
    for pos, meth in enumerate(cfg.methods):
        groups.setdefault(meth.sampler, []).append((pos, meth))

    rt = ResultsTable()
    cells = []
    for di, spec in enumerate(cfg.datasets):
        try:
            d = spec.load()
            plan = five_by_two_cv(d, derive_seed(cfg.master_seed, di, 0xC5))
        except Exception as exc:
            log.warning("dataset %s failed: %s", spec.label, exc)
            rt.errors.append({"dataset": spec.label, "error": f"{type(exc).__name__}: {exc}"})
            continue
        for rep, fold, tr, te in plan:
            for sampler, meths in groups.items():
                cells.append(_Cell(di, spec.label, d, rep, fold, tr, te, sampler, meths,
                                   cfg.ensemble_sizes, cfg.tree_params, cfg.master_seed,
                                   metrics, cfg.dump_posteriors))

    if cfg.threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            outcomes = list(ex.map(_safe_run, cells))
    else:
        outcomes = [_safe_run(c) for c in cells]

    keyed_records, keyed_dumps = [], []

    def flag(cell, mpos, meth, err):
        log.warning("cell %s rep=%d fold=%d method %s failed: %s", cell.ds_name, cell.rep,
                    cell.fold, meth.name, err)
        rt.errors.append({"dataset": cell.ds_name, "method": meth.name, "rep": cell.rep,
                          "fold": cell.fold, "error": err})
        for n in cell.sizes:
            keyed_records.append(((cell.ds_index, mpos, n, cell.rep, cell.fold, -1),
                                  Record(cell.ds_name, meth.name, n, cell.rep, cell.fold,
                                         "error", math.nan)))

    for cell, (res, err) in zip(cells, outcomes):
        if err is not None:
            for mpos, meth in cell.methods:
                flag(cell, mpos, meth, err)
            continue
        recs, dumps, platt, failures = res
        for mpos, meth in cell.methods:
            if mpos in failures:
                flag(cell, mpos, meth, failures[mpos])
        keyed_records += recs
        keyed_dumps += dumps
        rt.platt += platt
    rt.records = [r for _, r in sorted(keyed_records, key=lambda kr: kr[0])]
    rt.dumps = [d for _, d in sorted(keyed_dumps, key=lambda kd: kd[0])]
    rt.platt.sort(key=lambda p: (p["dataset"], p["method"], p["n_trees"], p["rep"], p["fold"]))
    return rt


# ---------------------------------------------------------------------------
# reports

def fold_means(rt: ResultsTable, metric: str, n_trees: int) -> dict[tuple[str, str], float]:
    """Mean over CV folds per (dataset, method); NaN folds are skipped."""
    acc: dict[tuple[str, str], list[float]] = defaultdict(list)
    for r in rt.select(metric, n_trees):
        acc[(r.dataset, r.method)].append(r.value)
    return {k: (float(np.nanmean(v)) if np.isfinite(v).any() else math.nan)
            for k, v in acc.items()}


def score_matrix(rt: ResultsTable, metric: str, n_trees: int, methods=None):
    """Methods x datasets matrix of fold-mean scores, keeping only complete datasets."""
    fm = fold_means(rt, metric, n_trees)
    methods = list(methods or rt.methods())
    datasets = [d for d in rt.datasets()
                if all(math.isfinite(fm.get((d, me), math.nan)) for me in methods)]
    sm = np.array([[fm[(d, me)] for d in datasets] for me in methods]).reshape(len(methods),
                                                                               len(datasets))
    return methods, datasets, sm


def comparison_summary(rt: ResultsTable, metric: str, n_trees: int, alpha: float = 0.05,
                       methods=None) -> dict:
    methods, datasets, sm = score_matrix(rt, metric, n_trees, methods)
    out = {"metric": metric, "n_trees": n_trees, "methods": methods, "datasets": datasets,
           "mean": dict(zip(methods, sm.mean(axis=1).tolist() if sm.size else [math.nan] * len(methods)))}
    if len(methods) < 2 or len(datasets) < 2:
        out["friedman"] = None
        return out
    fr = stats.friedman(sm)
    out["friedman"] = {"chi2": fr.chi2, "p": fr.p,
                       "mean_ranks": dict(zip(methods, fr.mean_ranks.tolist()))}
    if 2 <= len(methods) <= 10:
        ne = stats.nemenyi(fr.mean_ranks, len(methods), len(datasets), alpha)
        out["nemenyi"] = {
            "alpha": alpha, "cd": ne.cd,
            "significant_pairs": [[methods[i], methods[j]]
                                  for i in range(len(methods)) for j in range(i + 1, len(methods))
                                  if ne.significant[i, j]],
        }
    return out


def win_tie_loss_table(rt: ResultsTable, metric: str, n_trees: int, methods=None,
                       tol: float = 1e-10) -> list[list[str]]:
    """Upper-triangular W/T/L table: row method versus column method."""
    methods, _, sm = score_matrix(rt, metric, n_trees, methods)
    rows = [[""] + methods[1:]]
    for i, mi in enumerate(methods[:-1]):
        row = [mi]
        for j in range(1, len(methods)):
            row.append("-" if j <= i else "/".join(map(str, stats.win_tie_loss(sm, i, j, tol))))
        rows.append(row)
    return rows


def full_potential_report(rt: ResultsTable):
    """Gap between the best swept value and the realised value, per fold.

    The best value over the 0.01 grid is maxed with the realised value, since
    the method's own cutoff is one of the possible thresholds; gaps are >= 0.
    Returns (per-fold rows, {(method, n_trees, metric): mean gap}).
    """
    if not rt.dumps:
        raise ValueError("full-potential report needs posterior dumps (dump_posteriors)")
    rows = []
    for d in rt.dumps:
        if d.minority < 0:
            continue
        ind = (d.labels == d.minority).astype(np.int64)
        cm = M.confusion(d.labels, d.pred, 2)
        realised = {"macro_accuracy": M.macro_accuracy(cm), "macro_f1": M.macro_f1(cm, warn=False)}
        for metric, val in realised.items():
            _, best, _ = threshold_sweep(d.posteriors[:, d.minority], ind, metric)
            rows.append({"dataset": d.dataset, "method": d.method, "n_trees": d.n_trees,
                         "rep": d.rep, "fold": d.fold, "metric": metric, "realised": val,
                         "potential": max(best, val), "gap": max(best, val) - val})
    agg: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        agg[(r["method"], r["n_trees"], r["metric"])].append(r["gap"])
    return rows, {k: float(np.mean(v)) for k, v in agg.items()}


def recall_symmetry_report(rt: ResultsTable, n_trees: int | None = None) -> dict[str, dict]:
    """Per method: dataset-mean (recall_minority - recall_majority) and a t-test against 0."""
    n_trees = n_trees or max(rt.sizes())
    rmin = fold_means(rt, "recall_minority", n_trees)
    rmaj = fold_means(rt, "recall_majority", n_trees)
    out = {}
    for me in rt.methods():
        diffs = [rmin[(d, me)] - rmaj[(d, me)] for d in rt.datasets()
                 if (d, me) in rmin and (d, me) in rmaj]
        diffs = [x for x in diffs if math.isfinite(x)]
        res = {"n_datasets": len(diffs),
               "mean_diff": float(np.mean(diffs)) if diffs else math.nan,
               "recall_minority": float(np.nanmean([rmin[(d, me)] for d in rt.datasets()
                                                    if (d, me) in rmin])),
               "recall_majority": float(np.nanmean([rmaj[(d, me)] for d in rt.datasets()
                                                    if (d, me) in rmaj])),
               "t": math.nan, "p": math.nan}
        try:
            tt = stats.one_sample_t(diffs, 0.0)
            res["t"], res["p"] = tt.t, tt.p
        except ValueError as exc:
            res["error"] = str(exc)
        out[me] = res
    return out


def fig1_rows(rt: ResultsTable) -> list[tuple]:
    """(metric, method, size, mean over datasets of fold means)."""
    rows = []
    for metric in rt.metrics():
        for n in rt.sizes():
            fm = fold_means(rt, metric, n)
            for me in rt.methods():
                vals = [fm[(d, me)] for d in rt.datasets() if (d, me) in fm]
                if vals and np.isfinite(vals).any():
                    rows.append((metric, me, n, float(np.nanmean(vals))))
    return rows


def fig2_rows(rt: ResultsTable) -> list[tuple]:
    """(method, size, mean minority recall, mean majority recall)."""
    rows = []
    for n in rt.sizes():
        rmin, rmaj = fold_means(rt, "recall_minority", n), fold_means(rt, "recall_majority", n)
        for me in rt.methods():
            a = [rmin[(d, me)] for d in rt.datasets() if (d, me) in rmin]
            b = [rmaj[(d, me)] for d in rt.datasets() if (d, me) in rmaj]
            if a and b and np.isfinite(a).any():
                rows.append((me, n, float(np.nanmean(a)), float(np.nanmean(b))))
    return rows


def reliability_report(rt: ResultsTable, dataset: str, n_trees: int | None = None):
    """Reliability bins per method, pooling every fold of ``dataset``."""
    dumps = [d for d in rt.dumps if d.dataset == dataset and d.minority >= 0]
    if not dumps:
        raise ValueError(f"no binary posterior dumps for {dataset!r}")
    n_trees = n_trees or max(d.n_trees for d in dumps)
    out = {}
    for me in dict.fromkeys(d.method for d in dumps):
        sel = [d for d in dumps if d.method == me and d.n_trees == n_trees]
        p = np.concatenate([d.posteriors[:, d.minority] for d in sel])
        y = np.concatenate([(d.labels == d.minority).astype(int) for d in sel])
        out[me] = M.reliability_bins(p, y)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def summarize(rt: ResultsTable, alpha: float = 0.05) -> dict:
    """Friedman/Nemenyi per metric at the largest ensemble size, plus bookkeeping."""
    out = {"n_records": sum(r.metric != "error" for r in rt.records),
           "errors": rt.errors, "comparisons": [], "platt": rt.platt}
    if rt.records and rt.sizes():
        n = max(rt.sizes())
        for metric in rt.metrics():
            out["comparisons"].append(comparison_summary(rt, metric, n, alpha))
        if "recall_minority" in rt.metrics():
            out["recall_symmetry"] = recall_symmetry_report(rt, n)
    return _jsonable(out)


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_report(rt: ResultsTable, out_dir, alpha: float = 0.05) -> list[Path]:
    """Write summary.json, W/T/L tables, gap table and figure data into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "summary.json"
    p.write_text(json.dumps(summarize(rt, alpha), indent=1))
    written.append(p)
    if rt.records:
        n = max(rt.sizes())
        for metric in ("macro_accuracy", "macro_f1"):
            if metric in rt.metrics():
                p = out / f"wtl_{metric}.csv"
                rows = win_tie_loss_table(rt, metric, n)
                _write_rows(p, rows[0], rows[1:])
                written.append(p)
        p = out / "fig1.csv"
        _write_rows(p, ("metric", "method", "size", "mean"), fig1_rows(rt))
        written.append(p)
        if "recall_minority" in rt.metrics():
            p = out / "fig2.csv"
            _write_rows(p, ("method", "size", "recall_minority", "recall_majority"), fig2_rows(rt))
            written.append(p)
    if rt.dumps:
        rows, agg = full_potential_report(rt)
        p = out / "gap.csv"
        _write_rows(p, ("method", "n_trees", "metric", "mean_gap"),
                    [(k[0], k[1], k[2], v) for k, v in agg.items()])
        written.append(p)
        for ds in dict.fromkeys(d.dataset for d in rt.dumps if d.minority >= 0):
            rel = reliability_report(rt, ds)
            p = out / f"fig3_{ds}.csv"
            rows = []
            for me, tab in rel.items():
                for b in range(len(tab.count)):
                    rows.append((me, b, tab.edges[b], tab.edges[b + 1], tab.mean_predicted[b],
                                 tab.observed[b], int(tab.count[b])))
            _write_rows(p, ("method", "bin", "lo", "hi", "mean_predicted", "observed", "count"),
                        rows)
            written.append(p)
    return written
