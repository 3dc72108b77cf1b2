import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from jjphoton.errors import ParameterError
from jjphoton.events import EventStream
from jjphoton.source import sample_cox_stream, sample_poisson_stream
from jjphoton.stats import (
    fano_factor,
    fit_exponential,
    fit_power_law,
    g2_zero,
    interval_stats,
    ks_exponential,
    waiting_time_histogram,
)


def exact_exponential(n, tau=1.0):
    """Deterministic exponential sample: quantiles at mid-probabilities."""
    return -tau * np.log1p(-(np.arange(n) + 0.5) / n)


def power_law_sample(alpha, a, b, n, rng):
    u = rng.uniform(size=n)
    if alpha == 1.0:
        return a * (b / a) ** u
    k = 1.0 - alpha
    return (a**k + u * (b**k - a**k)) ** (1.0 / k)


def test_interval_stats_examples():
    assert interval_stats(exact_exponential(10_000)).ratio == pytest.approx(1.0, abs=0.01)
    assert interval_stats(EventStream(np.arange(10.0), 0, 10.0)).ratio == math.inf
    mix = np.concatenate([exact_exponential(50_000, 1.0), exact_exponential(50_000, 0.1)])
    assert interval_stats(mix).ratio == pytest.approx(0.55 / 0.8411, abs=2e-3)
    with pytest.raises(ParameterError):
        interval_stats(EventStream([0.1, 0.2], 0, 1.0))


def test_interval_stats_dead_time_option():
    iv = exact_exponential(1000) + 0.5
    assert interval_stats(iv, dead_time=0.5).mean == pytest.approx(1.0, rel=1e-3)


def test_bootstrap_ci_coverage():
    covered = 0
    trials = 60
    for k in range(trials):
        iv = np.random.default_rng(k).exponential(1.0, size=400)
        ci = interval_stats(iv, n_bootstrap=200, seed=1000 + k).ci
        covered += ci[0] <= 1.0 <= ci[1]
    assert covered / trials >= 0.9


def test_histogram_examples():
    iv = exact_exponential(100_000, 2.0)
    hist = waiting_time_histogram(iv, "linear", 200)
    assert hist.density[0] == pytest.approx(0.5, rel=0.03)
    assert hist.mass == pytest.approx(1.0, abs=1e-12)
    log_hist = waiting_time_histogram(iv, "log", 30)
    assert np.allclose(np.diff(np.log(log_hist.edges)), np.log(log_hist.edges[1] / log_hist.edges[0]))


@given(st.lists(st.floats(1e-6, 1e3), min_size=2, max_size=200),
       st.sampled_from(["linear", "log"]), st.integers(1, 60))
def test_histogram_normalization_property(iv, binning, n_bins):
    h = waiting_time_histogram(np.asarray(iv), binning, n_bins)
    assert np.all(np.diff(h.edges) > 0)
    assert h.mass == pytest.approx(1.0, abs=1e-12)


def test_bunched_histogram_excess_at_both_ends():
    s = sample_cox_stream(100.0, 0.005, 1000.0, 11)
    iv = s.intervals()
    tau = fit_exponential(s).tau
    h = waiting_time_histogram(s, "log", 40)
    c = h.centers
    w = np.exp(-c / tau) / tau
    short = (c < 0.02 * tau) & (h.counts > 20)
    long = (c > 5 * tau) & (h.counts > 20)
    assert short.any() and long.any()
    assert np.all(h.density[short] > w[short])
    assert np.all(h.density[long] > w[long])
    assert iv.size > 5e4


def test_fit_exponential_examples():
    assert fit_exponential([1.0, 1.0, 1.0]).tau == 1.0
    iv = exact_exponential(2000, 9.026)
    assert fit_exponential(iv).tau == pytest.approx(9.026, rel=1e-3)
    s = sample_poisson_stream(138.6, 300.0, 12)
    assert fit_exponential(s).tau == pytest.approx(7.214e-3, rel=0.02)


@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=100))
def test_fit_exponential_is_mean(iv):
    assert fit_exponential(iv).tau == float(np.mean(iv))


@pytest.mark.parametrize("alpha", [0.75, 1.0])
def test_power_law_self_fit(alpha):
    rng = np.random.default_rng(3)
    iv = power_law_sample(alpha, 1e-3, 10.0, 200_000, rng)
    h = waiting_time_histogram(iv, "log", 40)
    fit = fit_power_law(h, 2e-3, 5.0)
    assert fit.alpha == pytest.approx(alpha, abs=0.02)
    assert fit.goodness > 0.99


def test_power_law_flat_for_short_exponential_times():
    iv = exact_exponential(200_000, 1.0)
    h = waiting_time_histogram(iv, "log", 40, t_range=(1e-5, 10.0))
    assert fit_power_law(h, 1e-5, 1e-2).alpha == pytest.approx(0.0, abs=0.02)
    with pytest.raises(ParameterError):
        fit_power_law(h, 1e3, 1e4)


def test_ks_examples():
    pvals = [ks_exponential(np.random.default_rng(k).exponential(2.0, 10_000)).pvalue for k in range(200)]
    assert sps.kstest(pvals, "uniform").pvalue > 1e-3
    assert 0 <= np.mean(np.asarray(pvals) < 0.01) <= 0.03
    assert ks_exponential(np.full(100, 1.0) + 1e-9 * np.arange(100)).pvalue < 1e-6
    s = sample_cox_stream(100.0, 0.005, 110.0, 13)
    assert len(s) > 10_000
    assert ks_exponential(s).pvalue < 0.01
    with pytest.raises(ParameterError):
        ks_exponential(np.ones(5))


def test_ks_known_tau_and_plain_method():
    iv = np.random.default_rng(0).exponential(1.0, 5000)
    known = ks_exponential(iv, tau=1.0)
    plain = ks_exponential(iv, method="kolmogorov")
    steph = ks_exponential(iv)
    assert known.method == "kolmogorov-known"
    assert plain.pvalue >= steph.pvalue


def test_fano_examples():
    s = sample_poisson_stream(10.0, 1000.0, 14)
    assert fano_factor(s, 0.1) == pytest.approx(1.0, abs=0.05)
    c = sample_cox_stream(100.0, 0.005, 1000.0, 15)
    assert fano_factor(c, 1.0) == pytest.approx(2.0, abs=0.1)
    assert fano_factor(c, 1e-5) == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ParameterError):
        fano_factor(s, 100.0)


@pytest.mark.parametrize("rt", [0.2, 0.5, 1.0])
def test_bunching_indicators_agree(rt):
    r = 100.0
    s = sample_cox_stream(r, rt / r, 500.0, 16)
    assert interval_stats(s).ratio < 1.0
    assert fano_factor(s, 50 * rt / r) > 1.0


def test_g2_poisson_is_one():
    s = sample_poisson_stream(1000.0, 100.0, 17)
    assert g2_zero(s, 1e-3) == pytest.approx(1.0, abs=0.05)
