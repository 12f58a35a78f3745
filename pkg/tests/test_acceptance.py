"""Acceptance criteria 1-11.

Each test records a one-line verdict with the measured quantities; the lines
are printed at the end of the pytest run (see ``conftest.py``) or when this
file is executed directly.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from ptbagging.data import class_priors, gen_gaussian_imbalanced
from ptbagging.ensemble import (average_posteriors, ensemble_posterior, fit_ensemble,
                                predict_with_thresholds)
from ptbagging.harness import (DatasetSpec, ExperimentConfig, MethodSpec, binary_methods,
                               full_potential_report, recall_symmetry_report, run_benchmark)
from ptbagging.metrics import (aucpr, binary_rates, confusion, macro_accuracy, macro_f1,
                               reliability_bins, stratified_brier)
from ptbagging.sampling import (SamplerSpec, bootstrap, exactly_balanced, random_oversample,
                                roughly_balanced_size, smote, under_over, under_over_target,
                                under_to_smallest)
from ptbagging.stats import friedman, nemenyi, one_sample_t, wilcoxon_signed_rank
from ptbagging.thresholds import (SWEEP_GRID, ThresholdPolicy, binary_cutoff_labels,
                                  resolve_thresholds, threshold_sweep)

from conftest import counts_dataset

pytestmark = pytest.mark.acceptance

VERDICTS: dict[int, str] = {}
DATA_DIR = Path(os.environ.get("PTBAG_DATA_DIR", Path(__file__).parent / "data"))
SEEDS = range(10)

PT_MA = MethodSpec("PT_MA", SamplerSpec("bootstrap"), ThresholdPolicy("prior"))
EB = MethodSpec("EB", SamplerSpec("exactly_balanced"))
SMOTE = MethodSpec("SMOTE", SamplerSpec("smote"))


def verdict(n: int, title: str, ok: bool, detail: str):
    VERDICTS[n] = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    assert ok, VERDICTS[n]


def mac(y, pred, m=2):
    return macro_accuracy(confusion(y, pred, m))


def mf1(y, pred):
    return macro_f1(confusion(y, pred, 2), warn=False)


@pytest.fixture(scope="module")
def synthetic_runs():
    """Per seed: test labels and the 100-tree bootstrap and EB posteriors.

    Training sets of 2000 and independent test sets of 20000 points from the
    1-D generator with priors (0.9, 0.1) and means -1, +1.
    """
    runs = []
    for seed in SEEDS:
        train, _ = gen_gaussian_imbalanced(2000, [0.9, 0.1], seed=seed)
        test, _ = gen_gaussian_imbalanced(20000, [0.9, 0.1], seed=10_000 + seed)
        boot = fit_ensemble(train, 100, SamplerSpec("bootstrap"), master_seed=seed)
        eb = fit_ensemble(train, 100, SamplerSpec("exactly_balanced"), master_seed=seed)
        runs.append({"y": test.y, "priors": class_priors(train),
                     "boot": ensemble_posterior(boot, test.X),
                     "eb": ensemble_posterior(eb, test.X)})
    return runs


# -- 1 -----------------------------------------------------------------------

def _oracle_gap(prior_min, mean_gap, seed, n=20000):
    prior = [1 - prior_min, prior_min]
    means = [[-mean_gap / 2], [mean_gap / 2]]
    d, oracle = gen_gaussian_imbalanced(n, prior, means=means, seed=seed)
    post = oracle(d.X)
    realised = mac(d.y, predict_with_thresholds(post, prior))
    _, best, _ = threshold_sweep(post[:, 1], d.y)
    return realised, best


def test_c01_prior_thresholds_on_bayes_posterior():
    t0 = time.perf_counter()
    realised, best = _oracle_gap(0.1, 2.0, seed=123)
    elapsed = time.perf_counter() - t0
    verdict(1, "prior thresholds on the exact posterior reach the swept optimum",
            realised >= best - 0.002 and elapsed < 5.0,
            f"realised {realised:.4f}, swept best {best:.4f}, {elapsed:.2f}s")


def _population_macro_accuracy(x_cut, mu0, mu1):
    # class 1 predicted for x >= x_cut; unit-variance Gaussians
    return 0.5 * (norm.cdf(x_cut - mu0) + norm.sf(x_cut - mu1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 0.5), st.floats(0.3, 4.0))
def test_c01_property_population_optimum(prior_min, mean_gap):
    # Expected macro accuracy, computed from the Gaussian CDFs, of the prior
    # rule's decision boundary against every cutoff on the sweep grid.
    prior = [1 - prior_min, prior_min]
    mu0, mu1 = -mean_gap / 2, mean_gap / 2
    _, oracle = gen_gaussian_imbalanced(2, prior, means=[[mu0], [mu1]])
    xs = np.linspace(-12, 12, 240_001)
    pred = predict_with_thresholds(oracle(xs[:, None]), prior)
    assert np.all(np.diff(pred) >= 0)
    realised = _population_macro_accuracy(xs[np.argmax(pred == 1)], mu0, mu1)
    t = SWEEP_GRID[1:-1]
    x_t = (np.log(t / (1 - t)) - math.log(prior[1] / prior[0])) / mean_gap
    assert realised >= _population_macro_accuracy(x_t, mu0, mu1).max() - 1e-6


# -- 2 -----------------------------------------------------------------------

def test_c02_pt_ma_beats_half_threshold(synthetic_runs):
    diffs = []
    for r in synthetic_runs:
        pt = mac(r["y"], predict_with_thresholds(r["boot"], r["priors"]))
        uni = mac(r["y"], predict_with_thresholds(r["boot"], [0.5, 0.5]))
        diffs.append(pt - uni)
    verdict(2, "PT_MA macro accuracy exceeds the 0.5 threshold by >= 0.05",
            np.mean(diffs) >= 0.05,
            f"mean gain {np.mean(diffs):.4f} over 10 seeds, min {np.min(diffs):.4f}")


# -- 3 -----------------------------------------------------------------------

def _public_datasets():
    files = sorted(p for p in DATA_DIR.iterdir() if p.suffix.lower() in (".dat", ".arff", ".csv"))
    return tuple(DatasetSpec(str(p)) for p in files)


def test_c03_gap_to_full_potential():
    specs = _public_datasets()
    assert len(specs) >= 3, f"need >= 3 datasets in {DATA_DIR}"
    cfg = ExperimentConfig(specs, (PT_MA, SMOTE), ensemble_sizes=(100,),
                           metrics=("macro_accuracy",), sweep=True, dump_posteriors=True)
    rt = run_benchmark(cfg)
    assert not rt.errors, rt.errors
    _, agg = full_potential_report(rt)
    g_pt = agg[("PT_MA", 100, "macro_accuracy")]
    g_sm = agg[("SMOTE", 100, "macro_accuracy")]
    names = ",".join(s.label for s in specs)
    verdict(3, "PT_MA gap to swept macro accuracy <= 2.5% and below SMOTE's",
            g_pt <= 0.025 and g_pt < g_sm,
            f"{names}: PT_MA {100 * g_pt:.2f}%, SMOTE {100 * g_sm:.2f}%")


# -- 4 -----------------------------------------------------------------------

def test_c04_pt_f1_threshold(synthetic_runs):
    wins = 0
    for r in synthetic_runs:
        lam_f1 = resolve_thresholds(ThresholdPolicy("f1_midpoint"), r["priors"])
        f_pt = mf1(r["y"], predict_with_thresholds(r["boot"], lam_f1))
        f_ma = mf1(r["y"], predict_with_thresholds(r["boot"], r["priors"]))
        f_un = mf1(r["y"], predict_with_thresholds(r["boot"], [0.5, 0.5]))
        wins += f_pt >= f_ma and f_pt >= f_un
    verdict(4, "PT_F1 macro F1 >= PT_MA and >= uniform in >= 7 of 10 seeds", wins >= 7,
            f"{wins}/10 seeds")


# -- 5 -----------------------------------------------------------------------

def test_c05_sampler_distributions():
    rng = np.random.default_rng(2024)
    rb = np.mean([roughly_balanced_size(50, rng) for _ in range(10000)])
    d = counts_dataset([500, 500])
    distinct = np.mean([np.unique(bootstrap(d, rng).X[:, 0]).size / 1000 for _ in range(1000)])
    b = counts_dataset([95, 5], dim=2)
    tri = counts_dataset([100, 30, 10])
    sizes_ok = (
        exactly_balanced(b, rng).class_counts().tolist() == [5, 5]
        and random_oversample(b, rng).class_counts().tolist() == [95, 95]
        and smote(counts_dataset([100, 4], dim=2), 500, 5, rng).class_counts().tolist() == [24, 24]
        and under_over(tri, 50, rng).class_counts().tolist() == [50, 50, 50]
        and under_over(tri, 25, rng).class_counts().tolist() == [under_over_target(100, 25)] * 3
        and under_to_smallest(tri, rng).class_counts().tolist() == [10, 10, 10]
    )
    verdict(5, "RB mean size, bootstrap distinct fraction and exact size targets",
            abs(rb - 50) <= 0.3 and abs(distinct - 0.632) <= 0.01 and sizes_ok,
            f"RB mean {rb:.3f}, distinct {distinct:.4f}, sizes {'exact' if sizes_ok else 'WRONG'}")


# -- 6 -----------------------------------------------------------------------

def test_c06_metric_unit_suite():
    cm = confusion([1, 1, 0, 0, 0], [1, 0, 0, 0, 1], 2)
    rates = binary_rates(cm)
    per_class, _ = stratified_brier(np.array([[0.2, 0.8], [0.4, 0.6]]), [1, 1])
    fr = friedman([[0.9, 0.8, 0.7, 0.95], [0.5, 0.6, 0.4, 0.7], [0.1, 0.2, 0.3, 0.1]])
    tt = one_sample_t([1, 2, 3, 4, 5], 0)
    checks = {
        "confusion": (cm.tp(1), cm.fn(1), cm.tn(1), cm.fp(1)) == (1, 1, 2, 1),
        "rates": rates["recall"] == 0.5 and rates["precision"] == 0.5
        and math.isclose(rates["tnr"], 2 / 3),
        "macro_accuracy": math.isclose(macro_accuracy(cm), 7 / 12),
        "macro_f1": abs(macro_f1(cm) - 0.5833) < 1e-4,
        "brier": math.isclose(per_class[1], 0.2),
        "aucpr": aucpr([0.9, 0.4, 0.6, 0.1], [1, 0, 1, 0]) == 1.0,
        "sweep": threshold_sweep([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])[:2] == (0.31, 1.0),
        "thresholds": np.allclose(resolve_thresholds(ThresholdPolicy("f1_midpoint"), [0.9, 0.1]),
                                  [0.7, 0.3]),
        "friedman": math.isclose(fr.chi2, 8.0) and abs(fr.p - 0.0183) < 1e-3,
        "wilcoxon": wilcoxon_signed_rank([1, 2, 3, 4, 5]).p == 0.0625,
        "t": abs(tt.t - 4.2426) < 1e-3,
        "nemenyi": abs(nemenyi([1.0, 2.0, 3.0], 3, 36).cd - 0.552) < 1e-3,
    }
    bad = [k for k, ok in checks.items() if not ok]
    verdict(6, "metric, threshold and statistics reference values", not bad,
            f"{len(checks) - len(bad)}/{len(checks)} exact" + (f"; failing {bad}" if bad else ""))


# -- 7 -----------------------------------------------------------------------

def test_c07_recall_symmetry():
    specs = tuple(DatasetSpec(name=f"gauss{s}",
                              data=gen_gaussian_imbalanced(1000, [0.9, 0.1], seed=s)[0])
                  for s in SEEDS)
    cfg = ExperimentConfig(specs, (PT_MA, EB), ensemble_sizes=(50,),
                           metrics=("recall_minority", "recall_majority"))
    rep = recall_symmetry_report(run_benchmark(cfg))
    pt, eb = rep["PT_MA"], rep["EB"]
    verdict(7, "PT_MA recall difference smaller than EB's; EB favours the minority",
            abs(pt["mean_diff"]) < abs(eb["mean_diff"])
            and eb["recall_minority"] > eb["recall_majority"],
            f"PT_MA diff {pt['mean_diff']:+.4f}, EB diff {eb['mean_diff']:+.4f}, "
            f"EB recalls {eb['recall_minority']:.3f}/{eb['recall_majority']:.3f}")


# -- 8 -----------------------------------------------------------------------

def test_c08_reliability(synthetic_runs):
    y = np.concatenate([r["y"] for r in synthetic_runs])
    pt = reliability_bins(np.concatenate([r["boot"][:, 1] for r in synthetic_runs]), y)
    eb = reliability_bins(np.concatenate([r["eb"][:, 1] for r in synthetic_runs]), y)
    verdict(8, "PT-bagging reliability |gap| <= 0.08; EB overestimates the minority",
            pt.mean_abs_gap() <= 0.08 and eb.mean_signed_gap() > 0,
            f"PT mean |gap| {pt.mean_abs_gap():.4f}, EB signed gap {eb.mean_signed_gap():+.4f}, "
            f"pooled over 10 seeds")


# -- 9 -----------------------------------------------------------------------

def test_c09_thread_count_does_not_change_results(tmp_path):
    specs = tuple(DatasetSpec(name=f"g{s}",
                              data=gen_gaussian_imbalanced(400, [0.85, 0.15], seed=s)[0])
                  for s in range(2))
    out = []
    for threads in (1, 2, 3):
        cfg = ExperimentConfig(specs, tuple(binary_methods(platt=True)), ensemble_sizes=(3, 6),
                               sweep=True, master_seed=77, threads=threads)
        path = tmp_path / f"r{threads}.csv"
        run_benchmark(cfg).to_csv(path)
        out.append(path.read_bytes())
    verdict(9, "results CSV byte-identical across thread counts",
            out[0] == out[1] == out[2], f"threads 1/2/3, {len(out[0].splitlines()) - 1} records")


# -- 10 ----------------------------------------------------------------------

def test_c10_invariance_suite():
    rng = np.random.default_rng(10)
    n_cases = 1000
    failures = {"scale": 0, "uniform": 0, "sweep": 0, "normalisation": 0, "aucpr": 0}
    for _ in range(n_cases):
        m = int(rng.integers(2, 6))
        P = rng.dirichlet(np.ones(m), size=int(rng.integers(1, 30)))
        lam = rng.uniform(0.01, 1.0, m)
        c = float(np.exp(rng.uniform(-5, 5)))
        if not np.array_equal(predict_with_thresholds(P, lam), predict_with_thresholds(P, c * lam)):
            failures["scale"] += 1
        if not np.array_equal(predict_with_thresholds(P, np.full(m, 1 / m)), P.argmax(axis=1)):
            failures["uniform"] += 1

        per_tree = rng.dirichlet(np.ones(m) * 0.5, size=(int(rng.integers(1, 20)), 8))
        if np.max(np.abs(average_posteriors(per_tree).sum(axis=1) - 1)) > 1e-12:
            failures["normalisation"] += 1

        n = int(rng.integers(4, 60))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = np.round(rng.random(n), int(rng.integers(1, 4)))
        t = float(SWEEP_GRID[rng.integers(0, 101)])
        metric = ("macro_accuracy", "macro_f1")[int(rng.integers(0, 2))]
        _, best, _ = threshold_sweep(s, y, metric)
        cm = confusion(y, binary_cutoff_labels(s, t), 2)
        val = macro_accuracy(cm) if metric == "macro_accuracy" else macro_f1(cm, warn=False)
        if best - val < 0:
            failures["sweep"] += 1
        if aucpr(np.exp(3 * s) - 7, y) != aucpr(s, y):
            failures["aucpr"] += 1
    verdict(10, "scale, argmax, sweep dominance, normalisation and AUCPR invariances",
            not any(failures.values()),
            f"{n_cases} cases each, failures {failures}")


# -- 11 ----------------------------------------------------------------------

def test_c11_multiclass():
    prior = [0.7, 0.2, 0.1]
    wins = 0
    for seed in SEEDS:
        train, _ = gen_gaussian_imbalanced(2000, prior, seed=seed)
        test, _ = gen_gaussian_imbalanced(20000, prior, seed=20_000 + seed)
        e = fit_ensemble(train, 100, master_seed=seed)
        P = ensemble_posterior(e, test.X)
        pt = mac(test.y, predict_with_thresholds(P, e.training_priors), 3)
        uni = mac(test.y, predict_with_thresholds(P, np.full(3, 1 / 3)), 3)
        wins += pt >= uni
    train, _ = gen_gaussian_imbalanced(2000, prior, seed=0)
    counts = train.class_counts()
    rng = np.random.default_rng(0)
    uo_ok = under_over(train, 50, rng).class_counts().tolist() == \
        [under_over_target(int(counts.max()), 50)] * 3
    u2s_ok = under_to_smallest(train, rng).class_counts().tolist() == [int(counts.min())] * 3
    for spec in (SamplerSpec.make("under_over", a=50.0), SamplerSpec("under_to_smallest")):
        fit_ensemble(train, 10, spec, master_seed=1)  # runs to completion
    verdict(11, "multiclass PT_MA >= uniform in >= 8 of 10 seeds; UO(50) and U2S targets",
            wins >= 8 and uo_ok and u2s_ok,
            f"{wins}/10 seeds, under_over(50) {'ok' if uo_ok else 'WRONG'}, "
            f"under_to_smallest {'ok' if u2s_ok else 'WRONG'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
