"""Command-line interface: ``ptbagging <command> ...``.

Exit status is 0 on success, 1 on usage errors (bad flags, missing config)
and 2 on data errors (unreadable or degenerate datasets).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .data import DataError, gen_gaussian_imbalanced, load_dataset, preprocess, \
    read_instances, write_csv
from .ensemble import fit_ensemble, load_ensemble, predict_batch, save_ensemble
from .sampling import SamplerSpec
from .thresholds import ThresholdPolicy, threshold_sweep
from .tree import TreeParams

log = logging.getLogger("ptbagging")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _label_column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _param_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _sampler(kind: str, params: list[str]) -> SamplerSpec:
    kw = {}
    for p in params or []:
        if "=" not in p:
            raise UsageError(f"sampler parameter must be key=value, got {p!r}")
        k, v = p.split("=", 1)
        kw[k] = _param_value(v)
    try:
        return SamplerSpec.make(kind, **kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _policy(text: str) -> ThresholdPolicy:
    if text.startswith("custom:"):
        return ThresholdPolicy("custom", tuple(_floats(text[len("custom:"):])))
    if text not in ("uniform", "prior", "f1_midpoint"):
        raise UsageError(f"unknown threshold policy {text!r}")
    return ThresholdPolicy(text)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    prior = _floats(args.prior)
    means = None
    if args.means:
        means = np.array(_floats(args.means)).reshape(len(prior), args.dim)
    elif args.dim > 1:
        means = np.zeros((len(prior), args.dim))
        means[:, 0] = np.arange(len(prior)) * 2.0 - (len(prior) - 1)
    try:
        d, _ = gen_gaussian_imbalanced(args.n, prior, means, args.cov_scale, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_csv(d, args.out)
    log.info("wrote %d instances to %s", d.n_instances, args.out)
    return 0


def cmd_train(args) -> int:
    d = preprocess(load_dataset(args.data, args.data_format, args.label_column)).validate()
    e = fit_ensemble(d, args.n_trees, _sampler(args.sampler, args.sampler_param),
                     TreeParams(min_leaf=args.min_leaf), args.seed, n_jobs=args.threads)
    save_ensemble(e, args.out)
    log.info("saved %d-tree ensemble to %s", e.n, args.out)
    return 0


def _encode_for_model(path, e, label_column) -> tuple[np.ndarray, list[str] | None]:
    """Encode a data file against the model's attribute schema; returns (X, raw labels)."""
    path = Path(path)
    if path.suffix.lower() in (".arff", ".dat"):
        d = load_dataset(path)
        X = d.X.copy()
        by_name = {a.name: j for j, a in enumerate(d.attributes)}
        cols = []
        for att in e.attributes:
            if att.name not in by_name:
                raise DataError(f"{path}: attribute {att.name!r} missing")
            j = by_name[att.name]
            col = X[:, j]
            if att.is_nominal:
                src = d.attributes[j].categories
                mapped = np.full(col.shape, np.nan)
                ok = ~np.isnan(col)
                for i in np.flatnonzero(ok):
                    v = src[int(col[i])]
                    if v not in att.categories:
                        raise DataError(f"{path}: undeclared value {v!r} for {att.name!r}")
                    mapped[i] = att.categories.index(v)
                col = mapped
            cols.append(col)
        return np.column_stack(cols), [d.class_names[k] for k in d.y]
    X, extra = read_instances(path, e.attributes)
    labels = None
    if isinstance(label_column, str) and label_column in extra:
        labels = extra[label_column]
    elif len(extra) == 1:
        labels = next(iter(extra.values()))
    return X, labels


def cmd_predict(args) -> int:
    e = load_ensemble(args.model)
    X, raw = _encode_for_model(args.data, e, args.label_column)
    if np.isnan(X).any():
        raise DataError("rows with missing values cannot be scored")
    labels, post = predict_batch(e, X, _policy(args.threshold))
    names = e.class_names
    rows = []
    for i in range(len(labels)):
        rows.append({"index": i, "true": raw[i] if raw is not None else "",
                     "pred": names[labels[i]],
                     **{f"p_{c}": _fmt(post[i, k]) for k, c in enumerate(names)}})
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        if args.format == "json":
            for r in rows:
                for c in names:
                    r[f"p_{c}"] = float(r[f"p_{c}"])
            json.dump(rows, out, indent=1)
            out.write("\n")
        else:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["index", "true", "pred"] + [f"p_{c}" for c in names])
            for r in rows:
                w.writerow(list(r.values()))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def read_predictions(path) -> tuple[list[str], list[str], np.ndarray]:
    """Parse a ``predict`` CSV into (true labels, class names, posterior matrix)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["index", "true", "pred"]:
            raise DataError(f"{path}: not a prediction file")
        rows = list(reader)
    names = [h[2:] for h in header[3:]]
    try:
        post = np.array([[float(v) for v in r[3:]] for r in rows]).reshape(len(rows), len(names))
    except ValueError:
        raise DataError(f"{path}: non-numeric posterior") from None
    return [r[1] for r in rows], names, post


def cmd_sweep(args) -> int:
    truth, names, post = read_predictions(args.predictions)
    if len(names) != 2:
        raise DataError("the threshold sweep is defined for binary predictions only")
    if any(t not in names for t in truth):
        raise DataError("prediction file lacks true labels for every row")
    y = np.array([names.index(t) for t in truth])
    if args.minority is not None:
        if args.minority not in names:
            raise UsageError(f"unknown class {args.minority!r}")
        mi = names.index(args.minority)
    else:
        counts = np.bincount(y, minlength=2)
        mi = 1 if counts[1] <= counts[0] else 0
    best_t, best, curve = threshold_sweep(post[:, mi], (y == mi).astype(np.int64), args.metric)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["threshold", "metric_value"])
        for t, v in curve:
            w.writerow([f"{t:.2f}", _fmt(v)])
    finally:
        if out is not sys.stdout:
            out.close()
    log.info("best %s = %.6f at cutoff %.2f", args.metric, best, best_t)
    return 0


def _bench_config(args) -> harness.ExperimentConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {args.config!r} not found")
        try:
            cfg = harness.ExperimentConfig.from_json(path)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config!r} is not valid JSON: {exc}") from None
        except harness.ConfigError as exc:
            raise UsageError(str(exc)) from None
    elif args.data:
        specs = tuple(harness.DatasetSpec(p, label_column=args.label_column) for p in args.data)
        if args.multiclass:
            methods = harness.multiclass_methods()
        else:
            methods = harness.binary_methods()
        cfg = harness.ExperimentConfig(specs, tuple(methods))
    else:
        raise UsageError("bench needs --config or --data")
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.threads is not None:
        over["threads"] = args.threads
    if args.sizes:
        over["ensemble_sizes"] = tuple(int(s) for s in _floats(args.sizes))
    if args.sweep:
        over["sweep"] = True
    if args.dump_posteriors:
        over["dump_posteriors"] = True
    if args.calibration == "platt" and not any(m.calibration == "platt" for m in cfg.methods):
        over["methods"] = cfg.methods + (harness.MethodSpec("Platt", SamplerSpec("bootstrap"),
                                                            calibration="platt"),)
    if over:
        d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
        d.update(over)
        try:
            cfg = harness.ExperimentConfig(**d)
        except harness.ConfigError as exc:
            raise UsageError(str(exc)) from None
    return cfg


def cmd_bench(args) -> int:
    cfg = _bench_config(args)
    # surface unreadable datasets as data errors before spending compute
    for spec in cfg.datasets:
        spec.load()
    rt = harness.run_benchmark(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        rt.to_json(out / "results.json")
    else:
        rt.to_csv(out / "results.csv")
    if rt.dumps:
        rt.posteriors_to_csv(out / "posteriors.csv")
    (out / "summary.json").write_text(json.dumps(harness.summarize(rt), indent=1))
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    log.info("%d records, %d errors -> %s", len(rt.records), len(rt.errors), out)
    return 0


def cmd_report(args) -> int:
    try:
        rt = harness.ResultsTable.from_csv(args.results)
        if args.posteriors:
            rt.read_posteriors(args.posteriors)
    except (ValueError, KeyError) as exc:
        raise DataError(str(exc)) from None
    for p in harness.write_report(rt, args.out, args.alpha):
        log.info("wrote %s", p)
    return 0


def cmd_model(args) -> int:
    e = load_ensemble(args.model)
    if args.action == "save":
        if not args.out:
            raise UsageError("model save needs --out")
        save_ensemble(e, args.out)
    else:
        print(json.dumps({"n_trees": e.n, "classes": list(e.class_names),
                          "sampler": e.sampler.to_dict(), "master_seed": e.master_seed,
                          "training_priors": [float(p) for p in e.training_priors],
                          "attributes": [a.to_dict() for a in e.attributes]}, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ptbagging", description="Probability-thresholding bagging for "
                                              "imbalanced classification.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic Gaussian-mixture dataset")
    g.add_argument("--prior", required=True, help="class priors, e.g. 0.9,0.1")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--means", help="flattened class means (classes x dim)")
    g.add_argument("--cov-scale", type=float, default=1.0)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="fit and save a bagged ensemble")
    t.add_argument("--data", required=True)
    t.add_argument("--data-format", choices=("csv", "arff"))
    t.add_argument("--label-column", type=_label_column, default=-1)
    t.add_argument("--sampler", default="bootstrap")
    t.add_argument("--sampler-param", action="append", metavar="KEY=VALUE")
    t.add_argument("--n-trees", type=int, default=100)
    t.add_argument("--min-leaf", type=int, default=2)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("predict", help="label instances with a saved ensemble")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--label-column", type=_label_column, default="class")
    r.add_argument("--threshold", default="prior",
                   help="uniform, prior, f1_midpoint or custom:l1,l2,...")
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.set_defaults(func=cmd_predict)

    s = sub.add_parser("sweep", help="metric at cutoffs 0.00..1.00 for a prediction file")
    s.add_argument("--predictions", required=True)
    s.add_argument("--metric", choices=("macro_accuracy", "macro_f1"), default="macro_accuracy")
    s.add_argument("--minority")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="run the 5x2 cross-validation benchmark")
    b.add_argument("--config")
    b.add_argument("--data", nargs="+", help="datasets for the canonical method set")
    b.add_argument("--label-column", type=_label_column, default=-1)
    b.add_argument("--multiclass", action="store_true")
    b.add_argument("--sizes")
    b.add_argument("--seed", type=int)
    b.add_argument("--threads", type=int)
    b.add_argument("--calibration", choices=("none", "platt"), default="none")
    b.add_argument("--sweep", action="store_true")
    b.add_argument("--dump-posteriors", action="store_true")
    b.add_argument("--out", default="bench_out")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("report", help="statistics and tables from a results CSV")
    o.add_argument("--results", required=True)
    o.add_argument("--posteriors")
    o.add_argument("--alpha", type=float, choices=(0.05, 0.10), default=0.05)
    o.add_argument("--out", default="report")
    o.set_defaults(func=cmd_report)

    m = sub.add_parser("model", help="load or re-save a model file")
    m.add_argument("action", choices=("load", "save"))
    m.add_argument("--model", required=True)
    m.add_argument("--out")
    m.set_defaults(func=cmd_model)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if not getattr(args, "func", None):
            raise UsageError("ptbagging: a command is required (gen, train, predict, sweep, "
                             "bench, report, model)")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
