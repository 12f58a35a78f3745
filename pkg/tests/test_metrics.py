import math
import warnings

import numpy as np
import pytest

from ptbagging.metrics import (UndefinedMetricWarning, aucpr, binary_rates, confusion, f1,
                               macro_accuracy, macro_f1, per_class_recall, pr_curve,
                               reliability_bins, stratified_brier)

TRUE = [1, 1, 0, 0, 0]
PRED = [1, 0, 0, 0, 1]


def test_confusion_counts():
    cm = confusion(TRUE, PRED, 2)
    assert (cm.tp(1), cm.fn(1), cm.tn(1), cm.fp(1)) == (1, 1, 2, 1)
    np.testing.assert_array_equal(confusion([0, 1, 2, 2], [0, 1, 2, 2], 3).counts,
                                  np.diag([1, 1, 2]))
    assert confusion([], [], 2).total == 0
    with pytest.raises(ValueError):
        confusion([0, 3], [0, 1], 2)


def test_binary_rates():
    r = binary_rates(confusion(TRUE, PRED, 2))
    assert r["recall"] == 0.5 and r["precision"] == 0.5
    assert r["tnr"] == pytest.approx(2 / 3) and r["fpr"] == pytest.approx(1 / 3)
    r = binary_rates(confusion([1, 1], [1, 1], 2))
    assert math.isnan(r["tnr"])
    r = binary_rates(confusion([1, 0], [1, 0], 2))
    assert r["recall"] == r["precision"] == r["tnr"] == 1.0


def test_macro_accuracy():
    assert macro_accuracy(confusion(TRUE, PRED, 2)) == pytest.approx(7 / 12)
    y = np.array([0] * 99 + [1])
    assert macro_accuracy(confusion(y, np.zeros(100, int), 2)) == 0.5
    assert macro_accuracy(confusion([0, 1, 2], [0, 1, 2], 3)) == 1.0
    with pytest.raises(ValueError):
        macro_accuracy(confusion([], [], 2))


def test_f1_scores():
    cm = confusion(TRUE, PRED, 2)
    assert f1(cm, 1) == 0.5
    assert f1(cm, 0) == pytest.approx(4 / 6)
    assert macro_f1(cm) == pytest.approx(0.5833, abs=1e-4)
    assert macro_f1(confusion([0, 1, 1], [0, 1, 1], 2)) == 1.0


def test_macro_f1_undefined_class_warns():
    cm = confusion([0, 0, 0], [0, 0, 0], 2)
    with pytest.warns(UndefinedMetricWarning):
        assert macro_f1(cm) == 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        macro_f1(cm, warn=False)


def test_per_class_recall_absent_class_nan():
    r = per_class_recall(confusion([0, 0], [0, 1], 3))
    assert r[0] == 0.5 and math.isnan(r[1])


def test_aucpr():
    assert aucpr([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert aucpr([0.9, 0.4, 0.6, 0.1], [1, 0, 1, 0]) == 1.0
    assert aucpr([0.5] * 8, [1, 1, 0, 0, 0, 0, 0, 0]) == 0.25
    with pytest.raises(ValueError):
        aucpr([0.1, 0.2], [0, 0])


def test_aucpr_hand_computed():
    # ranked 1,0,1,0: precision 1 at recall .5, 2/3 at recall 1
    assert aucpr([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == pytest.approx(0.5 + 0.5 * 2 / 3)
    c = pr_curve([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0])
    np.testing.assert_allclose(c.recall, [0.5, 0.5, 1.0, 1.0])


def test_aucpr_matches_sklearn_average_precision():
    from sklearn.metrics import average_precision_score
    rng = np.random.default_rng(0)
    for _ in range(50):
        y = rng.integers(0, 2, 40)
        y[:2] = [0, 1]
        s = np.round(rng.random(40), 1)  # ties included
        assert aucpr(s, y) == pytest.approx(average_precision_score(y, s), abs=1e-12)


def test_stratified_brier():
    P = np.array([[0.2, 0.8], [0.4, 0.6]])
    per, overall = stratified_brier(P, [1, 1])
    assert per[1] == pytest.approx(0.2) and math.isnan(per[0])
    assert overall == pytest.approx(0.2)
    per, overall = stratified_brier(np.eye(2), [0, 1])
    assert overall == 0.0
    per, overall = stratified_brier(np.eye(2)[::-1], [0, 1])
    np.testing.assert_allclose(per, [2, 2])


def test_reliability_examples():
    t = reliability_bins([0.25] * 4, [1, 0, 0, 0])
    assert t.count[2] == 4 and t.mean_predicted[2] == 0.25 and t.observed[2] == 0.25
    assert t.mean_abs_gap() == 0.0
    t = reliability_bins([0.95] * 5, [0] * 5)
    assert t.count[9] == 5 and t.observed[9] == 0.0
    assert t.mean_signed_gap() == pytest.approx(0.95)
    t = reliability_bins([1.0, 0.0, 0.1], [1, 0, 0])
    assert t.count[9] == 1 and t.count[0] == 1 and t.count[1] == 1


def test_reliability_calibrated_generator():
    rng = np.random.default_rng(1)
    p = rng.random(50000)
    y = (rng.random(50000) < p).astype(int)
    t = reliability_bins(p, y)
    se = np.sqrt(t.mean_predicted * (1 - t.mean_predicted) / t.count)
    assert np.all(np.abs(t.observed - t.mean_predicted) <= 3 * se)
