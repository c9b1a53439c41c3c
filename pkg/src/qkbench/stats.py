"""Nonparametric tests, effect sizes, correlations and spectral kernel
diagnostics.

The chi-square survival function is computed in-package from the regularised
incomplete gamma function (power series below a+1, Lentz continued fraction
above) so the two evaluation routes can be cross-checked independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional, Sequence

import numpy as np
from scipy.special import stdtr

from .validation import check_symmetric

WILCOXON_EXACT_LIMIT = 25
SPEARMAN_EXACT_LIMIT = 8

# Critical values q_alpha(k)/sqrt(2) of the studentized range at alpha=0.05,
# infinite df, for k = 2..20 methods (Demsar 2006, Table 5a).
_NEMENYI_Q05 = {
    2: 1.959964, 3: 2.343701, 4: 2.569032, 5: 2.727774, 6: 2.849705,
    7: 2.948319, 8: 3.030879, 9: 3.102173, 10: 3.164461, 11: 3.218654,
    12: 3.268004, 13: 3.312739, 14: 3.353618, 15: 3.391230, 16: 3.426041,
    17: 3.458425, 18: 3.488685, 19: 3.517073, 20: 3.543799,
}


@dataclass
class TestReport:
    statistic: float
    p_value: float
    method: str
    n: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value,
                "method": self.method, "n": self.n, "extras": self.extras}


@dataclass(frozen=True)
class SpectralProfile:
    effective_rank_ratio: float
    top1_variance: float
    top5_variance: float
    diag_dominance: float
    negative_eig_fraction: float

    def to_dict(self) -> dict:
        return {
            "effective_rank_ratio": self.effective_rank_ratio,
            "top1_variance": self.top1_variance,
            "top5_variance": self.top5_variance,
            "diag_dominance": self.diag_dominance,
            "negative_eig_fraction": self.negative_eig_fraction,
        }


# ---------------------------------------------------------------------------
# special functions


def _gamma_p_series(a: float, x: float, eps: float = 1e-15, itmax: int = 500) -> float:
    """Lower regularised incomplete gamma P(a, x) by power series (x < a+1)."""
    if x <= 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(itmax):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * eps:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a: float, x: float, eps: float = 1e-15, itmax: int = 500) -> float:
    """Upper regularised incomplete gamma Q(a, x) by Lentz continued fraction
    (x >= a+1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, itmax + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammainc_upper(a: float, x: float) -> float:
    """Regularised upper incomplete gamma Q(a, x)."""
    if a <= 0.0:
        raise ValueError("a must be positive")
    if x < 0.0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi2_sf(x: float, df: float) -> float:
    """Chi-square survival function P(X >= x) with df degrees of freedom."""
    return gammainc_upper(df / 2.0, x / 2.0)


def _t_sf_two_sided(t: float, df: int) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return float(2.0 * stdtr(df, -abs(t)))


def _normal_sf_two_sided(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# ranking helpers


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Midrank assignment (1-based); ties share the average of their ranks."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=float)
    i = 0
    sv = v[order]
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_term(values: np.ndarray) -> float:
    """sum over tie groups of (t^3 - t)."""
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


# ---------------------------------------------------------------------------
# tests


def _wilcoxon_null_counts(ranks2: Sequence[int]) -> list[int]:
    """Counts of sign assignments reaching each doubled rank-sum value; the
    polynomial-product DP enumerates all 2^m assignments implicitly."""
    total = sum(ranks2)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in ranks2:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    return counts


def wilcoxon_signed_rank(a, b) -> TestReport:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped (the classical convention). For m <= 25 the
    p-value is exact over all 2^m sign assignments (two-sided = twice the
    smaller tail, capped at 1); above that, the normal approximation with tie
    correction is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D arrays of equal length")
    if len(a) < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    d = d[d != 0.0]
    m = len(d)
    if m == 0:
        return TestReport(0.0, 1.0, "wilcoxon-degenerate", 0,
                          {"degenerate": True, "note": "all differences zero"})
    ranks = _average_ranks(np.abs(d))
    t_plus = float(np.sum(ranks[d > 0]))
    if m <= WILCOXON_EXACT_LIMIT:
        ranks2 = [int(round(2.0 * r)) for r in ranks]
        counts = _wilcoxon_null_counts(ranks2)
        t2 = int(round(2.0 * t_plus))
        total = 2**m
        c_le = sum(counts[: t2 + 1])
        c_ge = sum(counts[t2:])
        p = min(1.0, 2.0 * min(c_le, c_ge) / total)
        method = "wilcoxon-exact"
    else:
        mean = m * (m + 1) / 4.0
        var = m * (m + 1) * (2 * m + 1) / 24.0 - _tie_term(np.abs(d)) / 48.0
        z = (t_plus - mean) / math.sqrt(var)
        p = _normal_sf_two_sided(z)
        method = "wilcoxon-normal"
    return TestReport(t_plus, p, method, m, {"degenerate": False})


def friedman(scores) -> TestReport:
    """Friedman chi-square over a methods x blocks score matrix, with average
    ranks and tie correction (Conover's T1 form)."""
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2 or S.shape[0] < 2 or S.shape[1] < 2:
        raise ValueError("need a methods x blocks matrix with >= 2 of each")
    k, n = S.shape
    ranks = np.empty_like(S)
    for j in range(n):
        ranks[:, j] = _average_ranks(S[:, j])
    rank_sums = ranks.sum(axis=1)
    a1 = float(np.sum(ranks**2))
    c1 = n * k * (k + 1) ** 2 / 4.0
    num = (k - 1) * float(np.sum((rank_sums - n * (k + 1) / 2.0) ** 2))
    denom = a1 - c1
    if denom <= 0.0:  # every block fully tied
        stat, p = 0.0, 1.0
    else:
        stat = num / denom
        p = chi2_sf(stat, k - 1)
    return TestReport(stat, p, "friedman", n,
                      {"df": k - 1, "mean_ranks": (rank_sums / n).tolist()})


def nemenyi(mean_ranks: Sequence[float], n_blocks: int, alpha: float = 0.05) -> dict:
    """Nemenyi post-hoc critical difference and pairwise significance flags
    from Friedman mean ranks (alpha = 0.05, k <= 20)."""
    if alpha != 0.05:
        raise ValueError("only alpha = 0.05 critical values are embedded")
    r = np.asarray(mean_ranks, dtype=float)
    k = len(r)
    if k < 2 or k > max(_NEMENYI_Q05):
        raise ValueError(f"k must be in [2, {max(_NEMENYI_Q05)}]")
    cd = _NEMENYI_Q05[k] * math.sqrt(k * (k + 1) / (6.0 * n_blocks * 2.0))
    diff = np.abs(r[:, None] - r[None, :])
    return {"critical_difference": float(cd),
            "mean_ranks": r.tolist(),
            "significant": (diff >= cd).tolist()}


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestReport:
    """Kruskal-Wallis H with tie correction and epsilon-squared effect size
    H / (n - 1)."""
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    for i, g in enumerate(arrays):
        if g.size == 0:
            raise ValueError(f"group {i} is empty")
    pooled = np.concatenate(arrays)
    n = len(pooled)
    if n < 3:
        raise ValueError("need at least 3 observations in total")
    ranks = _average_ranks(pooled)
    h = 0.0
    start = 0
    for g in arrays:
        r = ranks[start:start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    correction = 1.0 - _tie_term(pooled) / (n**3 - n)
    if correction <= 0.0:  # all observations identical
        h = 0.0
    else:
        h /= correction
    h = max(h, 0.0)
    df = len(groups) - 1
    eps_sq = h / (n - 1)
    return TestReport(h, chi2_sf(h, df), "kruskal-wallis", n,
                      {"df": df, "epsilon_squared": eps_sq})


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need 1-D arrays of equal length >= 2")
    ac = a - a.mean()
    bc = b - b.mean()
    va, vb = float(ac @ ac), float(bc @ bc)
    if va == 0.0 or vb == 0.0:
        raise ValueError("zero variance input")
    return float(ac @ bc / math.sqrt(va * vb))


def spearman(a, b) -> tuple[float, float]:
    """Spearman rho over average ranks with a two-sided p-value: exact
    permutation enumeration for n <= 8, t-approximation above."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D arrays of equal length")
    n = len(a)
    if n < 3:
        raise ValueError("need at least 3 observations")
    ra, rb = _average_ranks(a), _average_ranks(b)
    rho = pearson(ra, rb)
    if n <= SPEARMAN_EXACT_LIMIT:
        target = abs(rho) - 1e-12
        hits = 0
        total = 0
        for perm in permutations(rb):
            r = pearson(ra, np.asarray(perm))
            if abs(r) >= target:
                hits += 1
            total += 1
        p = hits / total
    else:
        if abs(rho) >= 1.0:
            p = 0.0
        else:
            t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
            p = _t_sf_two_sided(t, n - 2)
    return rho, p


def suitability_correlation(nl_gap, delta) -> tuple[float, float]:
    """Spearman correlation between the non-linearity gap and the
    quantum-classical delta across datasets.

    Inputs arrive rounded to table precision, which can collapse distinct
    raw values into ties; ranks are therefore ordinal with ties resolved by
    row order under a descending stable sort (rows are pre-sorted by delta),
    recovering the unrounded ordering. p is the two-sided t-approximation.
    """
    a = np.asarray(nl_gap, dtype=float)
    b = np.asarray(delta, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 3:
        raise ValueError("need 1-D arrays of equal length >= 3")
    n = len(a)

    def desc_first_ranks(v):
        order = np.argsort(-v, kind="stable")
        ranks = np.empty(n)
        ranks[order] = np.arange(n, 0, -1)
        return ranks

    rho = pearson(desc_first_ranks(a), desc_first_ranks(b))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, _t_sf_two_sided(t, n - 2)


def spectral_profile(K) -> SpectralProfile:
    """Eigenspectrum summary of a symmetric kernel matrix.

    Entropy (natural log) runs over the positive eigenvalues normalised to a
    distribution; effective rank ratio = exp(H)/N.
    """
    K = check_symmetric(K, "K")
    n = K.shape[0]
    evals = np.linalg.eigvalsh(0.5 * (K + K.T))
    pos = evals[evals > 0.0]
    if pos.size == 0:
        raise ValueError("kernel has no positive eigenvalues")
    p = pos / pos.sum()
    entropy = float(-np.sum(p * np.log(p)))
    desc = np.sort(pos)[::-1]
    top1 = float(desc[0] / pos.sum())
    top5 = float(desc[:5].sum() / pos.sum())
    diag_mean = float(np.mean(np.diag(K)))
    if n > 1:
        off_mean = float((K.sum() - np.trace(K)) / (n * (n - 1)))
    else:
        off_mean = 0.0
    dominance = diag_mean / max(abs(off_mean), 1e-12)
    return SpectralProfile(
        effective_rank_ratio=math.exp(entropy) / n,
        top1_variance=top1,
        top5_variance=top5,
        diag_dominance=dominance,
        negative_eig_fraction=float(np.sum(evals < -1e-10)) / n,
    )


def cov(values) -> float:
    """Coefficient of variation: sample standard deviation / mean."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError("need at least 2 values")
    mean = float(v.mean())
    if mean == 0.0:
        raise ValueError("zero mean")
    return float(v.std(ddof=1) / mean)


def ols_slope(x, y) -> dict:
    """Closed-form least squares of y on x with a two-sided t-test on the
    slope (n-2 df). A perfect non-flat line reports p = 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ValueError("need 1-D arrays of equal length >= 3")
    n = len(x)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("constant x")
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ssr = float(resid @ resid)
    if ssr <= 1e-300:
        p = 1.0 if slope == 0.0 else 0.0
    else:
        se = math.sqrt(ssr / (n - 2) / sxx)
        p = _t_sf_two_sided(slope / se, n - 2)
    return {"slope": slope, "intercept": intercept, "p_two_sided": p}
