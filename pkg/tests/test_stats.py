"""Tests for the Monte-Carlo verification layer."""

import math

import numpy as np
import pytest

from cascadekit.core import CascadeParams
from cascadekit.stats import (
    D_THRESHOLD_CRITICAL,
    D_THRESHOLD_FAST,
    StatReport,
    calibrate_ks_threshold,
    clt_small_h_test,
    clt_terminal_test,
    clt_terminal_trend,
    empirical_vs_exact_moments,
    increments_gaussianity,
    ks_normal_threshold,
    ks_statistic,
    residual_clt_test,
    with_seed,
)

REPS = 4000
SIGMA_RESID_H07 = 1.0319430604753999  # sqrt(ell - 1) at H = 0.7, b = 2


def test_ks_statistic_basics():
    """Closed-form cases of the two-sided order-statistic form."""
    assert math.isclose(ks_statistic(np.zeros(1)), 0.5)
    d_const = ks_statistic(np.zeros(1000))
    assert d_const >= 0.5
    with pytest.raises(ValueError):
        ks_statistic(np.array([]))
    # custom reference: exact uniform spacings give D = 1/(2N)
    u = (np.arange(1, 11) - 0.5) / 10
    d = ks_statistic(u, reference_cdf=lambda x: x)
    assert math.isclose(d, 0.05, rel_tol=1e-12)


def test_ks_threshold_and_calibration():
    """The 1% asymptotic point rejects ~1% of genuinely normal batches."""
    assert math.isclose(ks_normal_threshold(10000), 0.0163)
    rate = calibrate_ks_threshold(2000, n_runs=100, seed=0)
    assert rate <= 0.05


def test_stat_report_gating():
    """Only keys present in ``thresholds`` decide the pass flag."""
    r = StatReport(test="demo", params=CascadeParams(), sample_size=10,
                   statistics={"a": 1.0, "b": 99.0}, thresholds={"a": 2.0},
                   seed=0, runtime_s=0.0)
    assert r.passed
    assert "PASS" in r.summary_line()
    assert "a=1" in r.summary_line()
    bad = StatReport(test="demo", params=CascadeParams(), sample_size=10,
                     statistics={"a": 3.0}, thresholds={"a": 2.0},
                     seed=0, runtime_s=0.0)
    assert not bad.passed
    assert "FAIL" in bad.summary_line()


def test_with_seed():
    p = CascadeParams(base=2, hurst=0.7, seed=1)
    q = with_seed(p, 9)
    assert q.seed == 9 and q.hurst == 0.7 and p.seed == 1


def test_terminal_clt_symmetric():
    params = CascadeParams.symmetric(base=2, seed=0)
    r = clt_terminal_test(params, 16, REPS)
    assert r.passed
    assert r.statistics["ks_distance"] <= D_THRESHOLD_FAST
    assert r.statistics["moment2_z"] <= 4.0


def test_terminal_clt_critical_moments_pass_ks_lags():
    """Critical depth 16: moments match the exact table, KS does not.

    The critical normalized law at n = 16 sits a genuine ~0.15 KS away
    from the limit normal (the 1/sqrt(n) log-factor correction), so the
    moment gates pass while the distributional gate honestly fails at
    this depth.
    """
    params = CascadeParams(base=2, hurst=0.5, seed=0)
    r = clt_terminal_test(params, 16, REPS)
    for q in range(1, 5):
        assert r.statistics[f"moment{q}_z"] <= 4.0
    assert math.isclose(r.statistics["moment2_exact"], 1.125, rel_tol=1e-12)
    d = r.statistics["ks_distance"]
    assert D_THRESHOLD_CRITICAL < d < 0.25
    assert not r.passed


def test_terminal_clt_divergent_trend():
    """Divergent KS decreases strictly along depths 8, 12, 16."""
    params = CascadeParams(base=2, hurst=0.3, seed=0)
    reports, decreasing = clt_terminal_trend(params, (8, 12, 16), REPS)
    assert decreasing
    assert reports[-1].statistics["ks_distance"] <= D_THRESHOLD_FAST
    assert reports[-1].passed


def test_terminal_clt_regime_guards():
    with pytest.raises(ValueError):
        clt_terminal_test(CascadeParams(base=2, hurst=0.7, seed=0), 8, 100)
    with pytest.raises(ValueError):
        clt_terminal_test(CascadeParams(base=2, hurst=0.5, seed=0), 0, 100)


def test_small_h_scaling():
    """Finite-n scaled marginals match N(0,1) moments for H near 1."""
    reports = clt_small_h_test((0.8, 0.65), 16, REPS, seed=0)
    gaps = []
    for r in reports:
        assert r.passed
        assert r.statistics["mean_z"] <= 4.0
        assert r.statistics["m2_z"] <= 4.0
        gaps.append(abs(r.statistics["scale"] - r.statistics["limit_scale"]))
    # truncation between the finite-n and limit factors grows toward 1/2
    assert gaps[1] > gaps[0]
    assert gaps[0] <= 1e-3


def test_small_h_limit_scale_mean_far_from_critical():
    """At H = 0.8 the depth-16 truncation is already below the MC band,
    so the mean matches the limit-law factor 1/sigma_H too."""
    params = CascadeParams(base=2, hurst=0.8, seed=0)
    from cascadekit.core import sample_terminal
    from cascadekit.moments import closed_form_second_moment, sigma
    scale = 1.0 / math.sqrt(closed_form_second_moment(params, 16))
    y = scale * sample_terminal(params, 16, REPS)
    se = y.std(ddof=1) / math.sqrt(REPS)
    assert abs(y.mean() - 1.0 / sigma(params)) <= 4 * se


def test_small_h_rejects_nonconvergent():
    with pytest.raises(ValueError):
        clt_small_h_test((0.5,), 8, 100)


def test_increments_symmetric():
    params = CascadeParams.symmetric(base=2, seed=0)
    r = increments_gaussianity(params, 2, 12, REPS)
    assert r.passed
    assert r.statistics["marginal_ks_max"] <= D_THRESHOLD_FAST
    assert r.statistics["var_z_max"] <= 4.0
    assert r.statistics["offdiag_z_max"] <= 4.0


def test_increments_negative_control():
    """Two levels below the split the subtree mass is visibly non-normal.

    The same seed at n = p + 2 must degrade the marginal KS by a large
    factor; this guards against the test statistic being insensitive.
    """
    params = CascadeParams.symmetric(base=2, seed=0)
    good = increments_gaussianity(params, 2, 12, REPS)
    bad = increments_gaussianity(params, 2, 4, REPS)
    assert not bad.passed
    assert (bad.statistics["marginal_ks_max"]
            > 3 * good.statistics["marginal_ks_max"])


def test_increments_guards():
    with pytest.raises(ValueError):
        increments_gaussianity(CascadeParams(base=2, hurst=0.7, seed=0),
                               2, 8, 100)
    with pytest.raises(ValueError):
        increments_gaussianity(CascadeParams.symmetric(seed=0), 8, 8, 100)


def test_residual_clt():
    """Residual (Z_deep - Z_n), rescaled, is normal with frozen scale."""
    params = CascadeParams(base=2, hurst=0.7, seed=0)
    r = residual_clt_test(params, 8, REPS)
    assert r.passed
    assert r.statistics["ks_distance"] <= D_THRESHOLD_FAST
    assert math.isclose(r.statistics["sigma_resid"], SIGMA_RESID_H07,
                        rel_tol=1e-12)


def test_residual_clt_guards():
    with pytest.raises(ValueError):
        residual_clt_test(CascadeParams(base=2, hurst=0.5, seed=0), 8, 100)
    with pytest.raises(ValueError):
        residual_clt_test(CascadeParams(base=2, hurst=1.0, seed=0), 8, 100)


def test_empirical_vs_exact_moments():
    params = CascadeParams(base=2, hurst=0.7, seed=0)
    r = empirical_vs_exact_moments(params, 10, 20000, 4)
    assert r.passed
    for q in range(1, 5):
        assert r.statistics[f"moment{q}_z"] <= 4.0


def test_empirical_vs_exact_moments_degenerate():
    """H = 1 is deterministic: zero SE must not blow up the z-scores."""
    params = CascadeParams(base=2, hurst=1.0, seed=0)
    r = empirical_vs_exact_moments(params, 10, 100, 4)
    assert r.passed
    assert all(r.statistics[f"moment{q}_z"] == 0.0 for q in range(1, 5))
