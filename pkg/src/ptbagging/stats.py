"""Nonparametric comparison of classifiers over multiple datasets.

Friedman's chi-square test with the Nemenyi post-hoc critical difference
(Demšar, JMLR 7, 2006), the Wilcoxon signed-rank test, a one-sample t-test and
win/tie/loss counts. Distribution tails come from ``scipy.stats``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

# Critical values q_alpha of the two-tailed Nemenyi test for k = 2..10
# classifiers (Demšar 2006, Table 5a): studentized range statistic / sqrt(2).
NEMENYI_Q = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}


def _check_matrix(scores) -> np.ndarray:
    sm = np.asarray(scores, dtype=float)
    if sm.ndim != 2 or sm.shape[0] < 2 or sm.shape[1] < 2:
        raise ValueError("score matrix must be methods x datasets with at least 2 of each")
    if not np.isfinite(sm).all():
        raise ValueError("score matrix has missing or non-finite cells")
    return sm


def rank_methods(scores) -> np.ndarray:
    """Per-dataset ranks (methods x datasets), 1 = highest score, ties mid-ranked."""
    sm = _check_matrix(scores)
    return np.apply_along_axis(lambda col: sps.rankdata(-col, method="average"), 0, sm)


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    p: float
    mean_ranks: np.ndarray


def friedman(scores) -> FriedmanResult:
    """Friedman test on a methods x datasets matrix (higher is better)."""
    sm = _check_matrix(scores)
    k, n = sm.shape
    r = rank_methods(sm).mean(axis=1)
    chi2 = 12.0 * n / (k * (k + 1)) * (np.sum(r ** 2) - k * (k + 1) ** 2 / 4.0)
    chi2 = max(0.0, float(chi2))
    if chi2 < 1e-12:
        return FriedmanResult(0.0, 1.0, r)
    return FriedmanResult(chi2, float(sps.chi2.sf(chi2, k - 1)), r)


@dataclass(frozen=True)
class NemenyiResult:
    cd: float
    q: float
    significant: np.ndarray
    rank_diff: np.ndarray


def nemenyi_q(k: int, alpha: float = 0.05) -> float:
    if alpha not in NEMENYI_Q:
        raise ValueError("alpha must be 0.05 or 0.10")
    if not 2 <= k <= 10:
        raise ValueError("Nemenyi table covers 2 to 10 methods")
    return NEMENYI_Q[alpha][k - 2]


def nemenyi(mean_ranks, k: int, n: int, alpha: float = 0.05) -> NemenyiResult:
    """Critical difference ``q * sqrt(k(k+1)/(6N))`` and the pairs exceeding it."""
    q = nemenyi_q(k, alpha)
    cd = q * np.sqrt(k * (k + 1) / (6.0 * n))
    r = np.asarray(mean_ranks, dtype=float)
    diff = np.abs(r[:, None] - r[None, :])
    sig = diff >= cd
    np.fill_diagonal(sig, False)
    return NemenyiResult(float(cd), q, sig, diff)


@dataclass(frozen=True)
class WilcoxonResult:
    W: float
    p: float
    n: int
    exact: bool
    all_zero: bool = False


def _exact_signed_rank_cdf(doubled_ranks: np.ndarray, w2: int) -> float:
    """P(W+ <= w2/2) under the null, by counting all 2^n sign assignments."""
    total = int(doubled_ranks.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[:-r] if r else dist
        dist = dist + shifted
    dist /= dist.sum()
    return float(dist[: w2 + 1].sum())


def wilcoxon_signed_rank(a, b=None, exact_max_n: int = 20) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied absolute differences get mid-ranks.
    Exact null distribution for n <= ``exact_max_n``, otherwise a normal
    approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=float)
    d = a if b is None else a - np.asarray(b, dtype=float)
    if b is not None and a.shape != np.shape(b):
        raise ValueError("paired samples differ in length")
    d = d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, True, all_zero=True)
    ranks = sps.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    W = min(w_plus, w_minus)
    if n <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = 2.0 * _exact_signed_rank_cdf(doubled, int(round(2 * W)))
        return WilcoxonResult(W, min(1.0, p), n, True)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    z = (W - mean + 0.5) / np.sqrt(var)  # continuity correction
    return WilcoxonResult(W, float(min(1.0, 2.0 * sps.norm.cdf(z))), n, False)


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int


def one_sample_t(x, mu0: float = 0.0) -> TTestResult:
    """Two-sided one-sample t-test of ``mean(x) == mu0``.

    A sample lying entirely on ``mu0`` gives t = 0, p = 1; any other
    zero-variance sample is an error.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("one-sample t-test needs at least 2 observations")
    s = x.std(ddof=1)
    if s == 0:
        if np.all(x == mu0):
            return TTestResult(0.0, 1.0, n - 1)
        raise ValueError("one-sample t-test is undefined for zero sample variance")
    t = (x.mean() - mu0) / (s / np.sqrt(n))
    return TTestResult(float(t), float(2.0 * sps.t.sf(abs(t), n - 1)), n - 1)


def win_tie_loss(scores, i: int, j: int, tol: float = 1e-10) -> tuple[int, int, int]:
    """Datasets where method ``i`` beats, ties (|diff| <= tol) or loses to ``j``."""
    sm = np.asarray(scores, dtype=float)
    diff = sm[i] - sm[j]
    ties = np.abs(diff) <= tol
    return int(np.sum(~ties & (diff > 0))), int(np.sum(ties)), int(np.sum(~ties & (diff < 0)))
