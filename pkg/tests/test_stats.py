import math

import numpy as np
import pytest
import scipy.special

from qkbench.stats import (_average_ranks, _gamma_p_series, _gamma_q_contfrac,
                           chi2_sf, cov, friedman, kruskal_wallis, nemenyi,
                           ols_slope, pearson, spearman, spectral_profile,
                           suitability_correlation, wilcoxon_signed_rank)

from oracles import wilcoxon_enumeration


# --- wilcoxon ----------------------------------------------------------------


def test_wilcoxon_five_same_sign_floor():
    a = np.array([0.9, 0.8, 0.85, 0.7, 0.95])
    b = a - np.array([0.01, 0.02, 0.03, 0.04, 0.05])
    rep = wilcoxon_signed_rank(a, b)
    assert rep.p_value == 0.0625
    assert rep.method == "wilcoxon-exact"


def test_wilcoxon_degenerate_equal_arrays():
    a = np.array([0.5, 0.6, 0.7])
    rep = wilcoxon_signed_rank(a, a)
    assert rep.p_value == 1.0
    assert rep.extras["degenerate"] is True


def test_wilcoxon_drops_zero_differences():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    b = np.array([1.0, 2.0, 2.5, 4.5, 4.0, 5.0])  # two zero diffs dropped
    rep = wilcoxon_signed_rank(a, b)
    assert rep.n == 4


@pytest.mark.parametrize("m", range(2, 13))
def test_wilcoxon_matches_enumeration_oracle(m):
    rng = np.random.default_rng(m)
    for trial in range(4):
        a = rng.normal(size=m)
        b = a - np.round(rng.normal(size=m), 1)  # rounded -> ties and zeros
        rep = wilcoxon_signed_rank(a, b)
        t_ref, p_ref = wilcoxon_enumeration(a, b)
        if rep.extras.get("degenerate"):
            assert p_ref == 1.0
            continue
        assert rep.statistic == t_ref
        assert rep.p_value == p_ref


def test_wilcoxon_normal_path():
    rng = np.random.default_rng(99)
    a = rng.normal(size=40)
    b = a - rng.normal(0.3, 1.0, size=40)
    rep = wilcoxon_signed_rank(a, b)
    assert rep.method == "wilcoxon-normal"
    assert 0.0 <= rep.p_value <= 1.0
    from scipy.stats import wilcoxon as sp_wilcoxon

    sp = sp_wilcoxon(a, b, correction=False, mode="approx")
    assert rep.p_value == pytest.approx(sp.pvalue, rel=1e-6)


# --- friedman / nemenyi --------------------------------------------------------


def test_friedman_ordered_example():
    scores = np.array([[0.1, 0.2, 0.3, 0.4],
                       [0.5, 0.6, 0.7, 0.8],
                       [0.9, 1.0, 1.1, 1.2]])
    rep = friedman(scores)
    assert rep.statistic == pytest.approx(8.0)
    assert rep.extras["df"] == 2
    assert rep.p_value == pytest.approx(chi2_sf(8.0, 2))


def test_friedman_identical_methods():
    scores = np.tile(np.array([0.3, 0.5, 0.7, 0.2]), (3, 1))
    rep = friedman(scores)
    assert rep.statistic == 0.0
    assert rep.p_value == 1.0


def test_friedman_permutation_invariance():
    rng = np.random.default_rng(42)
    scores = rng.random((4, 6))
    rep1 = friedman(scores)
    rep2 = friedman(scores[[2, 0, 3, 1]])
    assert rep1.statistic == pytest.approx(rep2.statistic)


def test_friedman_matches_scipy_without_ties():
    from scipy.stats import friedmanchisquare

    rng = np.random.default_rng(43)
    scores = rng.random((5, 8))
    rep = friedman(scores)
    sp = friedmanchisquare(*[scores[i] for i in range(5)])
    assert rep.statistic == pytest.approx(sp.statistic)
    assert rep.p_value == pytest.approx(sp.pvalue, rel=1e-9)


def test_nemenyi_critical_difference():
    out = nemenyi([1.0, 2.0, 3.0], n_blocks=10)
    want = 2.343701 * math.sqrt(3 * 4 / (12 * 10))
    assert out["critical_difference"] == pytest.approx(want)
    assert out["significant"][0][2] == (2.0 >= out["critical_difference"])


# --- kruskal-wallis -------------------------------------------------------------


def test_kw_identical_groups():
    rep = kruskal_wallis([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]])
    assert rep.statistic == 0.0
    assert rep.extras["epsilon_squared"] == 0.0


def test_kw_separated_groups_hand_value():
    rep = kruskal_wallis([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert rep.statistic == pytest.approx(12 / 42 * (36 / 3 + 225 / 3) - 21)
    assert rep.extras["df"] == 1


def test_kw_epsilon_squared_bounded():
    rng = np.random.default_rng(44)
    for _ in range(20):
        groups = [rng.random(rng.integers(2, 6)) for _ in range(3)]
        rep = kruskal_wallis(groups)
        assert 0.0 <= rep.extras["epsilon_squared"] <= 1.0


def test_kw_matches_scipy_with_ties():
    from scipy.stats import kruskal

    rng = np.random.default_rng(45)
    groups = [np.round(rng.random(7), 1) for _ in range(3)]
    rep = kruskal_wallis(groups)
    sp = kruskal(*groups)
    assert rep.statistic == pytest.approx(sp.statistic)
    assert rep.p_value == pytest.approx(sp.pvalue, rel=1e-9)


def test_kw_empty_group_error():
    with pytest.raises(ValueError):
        kruskal_wallis([[1.0, 2.0], []])


# --- correlations ----------------------------------------------------------------


def test_pearson_basics():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])


def test_spearman_monotone():
    rho, p = spearman([1, 2, 3, 4], [10, 20, 25, 90])
    assert rho == pytest.approx(1.0)
    assert p == pytest.approx(2 / 24)  # exact permutation at n=4


def test_spearman_antimonotone():
    rho, _ = spearman([1, 2, 3], [5, 4, 3])
    assert rho == pytest.approx(-1.0)


def test_spearman_monotone_transform_invariance():
    rng = np.random.default_rng(46)
    a = rng.normal(size=7)
    b = rng.normal(size=7)
    r1, p1 = spearman(a, b)
    r2, p2 = spearman(np.exp(a), b ** 3)
    assert r1 == pytest.approx(r2)
    assert p1 == pytest.approx(p2)


def test_spearman_t_approx_matches_scipy_above_exact_limit():
    from scipy.stats import spearmanr

    rng = np.random.default_rng(47)
    a = rng.normal(size=12)
    b = rng.normal(size=12)
    rho, p = spearman(a, b)
    sp = spearmanr(a, b)
    assert rho == pytest.approx(sp.statistic)
    assert p == pytest.approx(sp.pvalue, rel=1e-9)


# suitability table: (nl_gap, delta) per dataset, rows pre-sorted by delta
SUITABILITY_NL = [0.043, 0.017, 0.079, 0.086, -0.008, 0.006, 0.010, 0.017, -0.008]
SUITABILITY_DELTA = [0.032, -0.016, -0.031, -0.059, -0.060, -0.063, -0.079,
                     -0.083, -0.120]


def test_suitability_correlation_reference_values():
    rho, p = suitability_correlation(SUITABILITY_NL, SUITABILITY_DELTA)
    assert rho == pytest.approx(0.683, abs=1e-3)
    assert p == pytest.approx(0.042, abs=5e-3)


# --- chi-square survival function --------------------------------------------------


def test_chi2_sf_cross_route_and_scipy():
    for df in range(1, 51):
        a = df / 2.0
        for x in np.linspace(0.25, 200.0, 41):
            q = chi2_sf(x, df)
            assert q == pytest.approx(scipy.special.gammaincc(a, x / 2.0),
                                      abs=1e-12, rel=1e-10)
            # cross-evaluate the two routes where both converge
            if x / 2.0 >= a + 1.0:
                series = 1.0 - _gamma_p_series(a, x / 2.0)
                cf = _gamma_q_contfrac(a, x / 2.0)
                assert abs(series - cf) < 1e-10


def test_chi2_sf_edges():
    assert chi2_sf(0.0, 3) == 1.0
    with pytest.raises(ValueError):
        chi2_sf(-1.0, 3)


# --- spectral profile ---------------------------------------------------------------


def test_spectral_identity():
    for n in (5, 50):
        prof = spectral_profile(np.eye(n))
        assert prof.effective_rank_ratio == pytest.approx(1.0, abs=1e-12)
        assert prof.negative_eig_fraction == 0.0


def test_spectral_rank_one():
    n = 40
    prof = spectral_profile(np.ones((n, n)) / n)
    assert prof.effective_rank_ratio == pytest.approx(1.0 / n, abs=1e-9)
    assert prof.top1_variance == pytest.approx(1.0)


def test_spectral_diag_dominance():
    K = np.eye(6) + 0.5 * (np.ones((6, 6)) - np.eye(6))
    prof = spectral_profile(K)
    assert prof.diag_dominance == pytest.approx(2.0)


def test_spectral_scale_invariance():
    rng = np.random.default_rng(48)
    A = rng.normal(size=(12, 12))
    K = A @ A.T
    base = spectral_profile(K)
    for c in (1e-3, 1.0, 1e3):
        prof = spectral_profile(c * K)
        assert prof.effective_rank_ratio == pytest.approx(base.effective_rank_ratio)
        assert prof.top1_variance == pytest.approx(base.top1_variance)
        assert prof.top5_variance == pytest.approx(base.top5_variance)
        assert prof.diag_dominance == pytest.approx(base.diag_dominance)
        assert prof.negative_eig_fraction == base.negative_eig_fraction


def test_spectral_rejects_asymmetric():
    K = np.eye(4)
    K[0, 1] = 0.5
    with pytest.raises(ValueError):
        spectral_profile(K)


# --- cov and ols -------------------------------------------------------------------


def test_cov_values():
    assert cov([5.0, 5.0, 5.0]) == 0.0
    assert cov([1.0, 3.0]) == pytest.approx(math.sqrt(2) / 2)
    assert cov([0.80, 0.82]) == pytest.approx(0.017459, abs=1e-5)
    assert cov([2.0, 6.0]) == pytest.approx(cov([1.0, 3.0]))


def test_cov_errors():
    with pytest.raises(ValueError):
        cov([1.0])
    with pytest.raises(ValueError):
        cov([-1.0, 1.0])


def test_ols_exact_line():
    x = np.linspace(2.0, 6.0, 6)
    y = 0.05 * x + 0.2
    out = ols_slope(x, y)
    assert out["slope"] == pytest.approx(0.05, abs=1e-12)
    assert out["p_two_sided"] < 0.01


def test_ols_constant_y():
    out = ols_slope(np.array([1.0, 2.0, 3.0, 4.0]), np.full(4, 0.7))
    assert out["slope"] == 0.0
    assert out["p_two_sided"] == pytest.approx(1.0)


def test_ols_permutation_invariance():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    y = np.array([0.2, 0.5, 0.3, 0.9, 0.7])
    a = ols_slope(x, y)
    perm = [3, 1, 4, 0, 2]
    b = ols_slope(x[perm], y[perm])
    assert a["slope"] == pytest.approx(b["slope"])
    assert a["p_two_sided"] == pytest.approx(b["p_two_sided"])


def test_ols_matches_scipy_linregress():
    from scipy.stats import linregress

    rng = np.random.default_rng(49)
    x = rng.normal(size=10)
    y = 0.3 * x + rng.normal(scale=0.1, size=10)
    out = ols_slope(x, y)
    sp = linregress(x, y)
    assert out["slope"] == pytest.approx(sp.slope)
    assert out["intercept"] == pytest.approx(sp.intercept)
    assert out["p_two_sided"] == pytest.approx(sp.pvalue, rel=1e-9)


def test_ols_constant_x_error():
    with pytest.raises(ValueError):
        ols_slope(np.ones(5), np.arange(5.0))


def test_average_ranks_midranks():
    ranks = _average_ranks(np.array([3.0, 1.0, 3.0, 2.0]))
    assert list(ranks) == [3.5, 1.0, 3.5, 2.0]
