"""Threshold moving on a bagged ensemble, and why the sampler matters.

Fits one ensemble on plain bootstrap samples and one on exactly balanced
samples, then compares decision rules and probability reliability on a large
held-out set.

    python demos/threshold_moving.py
"""

import numpy as np

from ptbagging import (SamplerSpec, ThresholdPolicy, class_priors, ensemble_posterior,
                       fit_ensemble, gen_gaussian_imbalanced, predict_with_thresholds,
                       resolve_thresholds, threshold_sweep)
from ptbagging.metrics import confusion, macro_accuracy, macro_f1, reliability_bins


def scores(y, pred):
    cm = confusion(y, pred, 2)
    return macro_accuracy(cm), macro_f1(cm, warn=False)


def main():
    train, _ = gen_gaussian_imbalanced(2000, [0.9, 0.1], seed=1)
    test, _ = gen_gaussian_imbalanced(20000, [0.9, 0.1], seed=2)
    priors = class_priors(train)

    bag = fit_ensemble(train, 100, SamplerSpec("bootstrap"), master_seed=1)
    eb = fit_ensemble(train, 100, SamplerSpec("exactly_balanced"), master_seed=1)
    P_bag = ensemble_posterior(bag, test.X)
    P_eb = ensemble_posterior(eb, test.X)

    print(f"training priors {np.round(priors, 3)}")
    print(f"{'rule':<28}{'macro acc':>10}{'macro F1':>10}")
    rules = {
        "bagging, 0.5 cutoff": (P_bag, [0.5, 0.5]),
        "bagging, prior thresholds": (P_bag, priors),
        "bagging, F1 midpoint": (P_bag, resolve_thresholds(ThresholdPolicy("f1_midpoint"), priors)),
        "balanced bagging, 0.5": (P_eb, [0.5, 0.5]),
    }
    for name, (P, lam) in rules.items():
        acc, f1 = scores(test.y, predict_with_thresholds(P, lam))
        print(f"{name:<28}{acc:>10.4f}{f1:>10.4f}")
    t, best, _ = threshold_sweep(P_bag[:, 1], test.y)
    print(f"{'oracle sweep (cutoff ' + format(t, '.2f') + ')':<28}{best:>10.4f}")

    print("\nreliability of the minority posterior (10 bins)")
    for name, P in (("bagging", P_bag), ("balanced bagging", P_eb)):
        r = reliability_bins(P[:, 1], test.y)
        print(f"  {name:<18} mean |gap| {r.mean_abs_gap():.4f}  signed gap {r.mean_signed_gap():+.4f}")


if __name__ == "__main__":
    main()
