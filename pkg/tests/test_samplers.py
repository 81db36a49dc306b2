import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from dpnormopt.geometry import Ball, Box, NormSpec, interval
from dpnormopt.mechanism import GibbsTarget
from dpnormopt.samplers import (GibbsDensity1D, _sample_piece, QueryCounter, SamplerConfig, SamplerError, effective_sample_size,
                                geweke_z, rejection_sample_1d, sample, sample_exact_1d, sample_hit_and_run,
                                sample_mala, tv_distance_estimate)


def _target(nld, dom, sc=0.0, grad=None, breakpoints=None):
    dim = dom.dim
    return GibbsTarget(nld, grad, dom, sc, 0.0, dim, NormSpec.lp(2, dim), breakpoints)


def _gauss_ball(d=2, radius=6.0):
    dom = Ball(NormSpec.lp(2, d), np.zeros(d), radius)
    nld = lambda X: 0.5 * np.sum(np.atleast_2d(X) ** 2, axis=1)
    grad = lambda X: np.asarray(X, dtype=float)
    return _target(nld, dom, 1.0, grad)


def test_exact_1d_examples():
    n = 100_000
    x = sample_exact_1d(lambda t: 0.5 * t * t, (-8, 8), n, seed=0)
    assert abs(x.mean()) < 4 / math.sqrt(n)
    assert abs(x.var() - 1) < 0.1
    u = sample_exact_1d(lambda t: np.zeros_like(t), (0, 1), n, seed=1)
    assert stats.kstest(u, "uniform").statistic < 1.63 / math.sqrt(n)
    lap = sample_exact_1d(np.abs, (-10, 10), n, seed=2, breakpoints=[0.0])
    a = np.abs(lap)
    exact = (1 - 11 * math.exp(-10)) / (1 - math.exp(-10))
    assert abs(a.mean() - exact) < 3 * a.std() / math.sqrt(n)


def test_exact_1d_validation():
    with pytest.raises(ValueError):
        sample_exact_1d(np.abs, (0, 1), 10, tol=1e-3)
    with pytest.raises(ValueError):
        SamplerConfig(quadrature_tol=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(n_samples=0)
    with pytest.raises(ValueError):
        SamplerConfig(method="gibbs")
    with pytest.raises(ValueError):
        SamplerConfig(burn_in=0)


def test_density_cdf_ppf_consistency():
    dens = GibbsDensity1D(lambda t: np.abs(t - 0.3) + 0.2 * t * t, -3, 4, breakpoints=[0.3])
    u = np.linspace(0.001, 0.999, 50)
    assert np.allclose(dens.cdf(dens.ppf(u)), u, atol=1e-10)
    xs = np.linspace(-3, 4, 7)
    fd = (dens.cdf(xs[1:-1] + 1e-6) - dens.cdf(xs[1:-1] - 1e-6)) / 2e-6
    assert np.allclose(fd, dens.pdf(xs[1:-1]), rtol=1e-5)


@pytest.mark.parametrize("delta", [-5.0, -0.3, 0.3, 5.0])
def test_linear_piece_inversion(delta):
    rng = np.random.default_rng(0)
    x = np.array([_sample_piece(rng, 0.0, 1.0, 0.0, delta) for _ in range(20_000)])
    cdf = lambda t: np.expm1(-delta * t) / np.expm1(-delta)
    assert stats.kstest(x, cdf).pvalue > 1e-3


def test_rejection_sampler_matches_quadrature():
    rng = np.random.default_rng(0)
    phi = lambda t: 3 * np.abs(t - 0.5) + 0.5 * t * t
    draws = np.array([rejection_sample_1d(phi, -2.0, 3.0, rng)[0] for _ in range(20000)])
    dens = GibbsDensity1D(phi, -2.0, 3.0, breakpoints=[0.5])
    assert stats.kstest(draws, dens.cdf).pvalue > 1e-3


def test_hit_and_run_gaussian_on_ball():
    X, rep = sample_hit_and_run(_gauss_ball(), SamplerConfig(n_samples=10_000, seed=3))
    assert np.all(np.abs(X.mean(axis=0)) < 0.05)
    assert np.allclose(np.cov(X.T), np.eye(2), atol=0.1)
    assert rep.value_queries > 0 and rep.converged


def test_mala_gaussian_on_ball():
    X, rep = sample_mala(_gauss_ball(), SamplerConfig(method="mala", n_samples=10_000, seed=4, thinning=5))
    assert np.all(np.abs(X.mean(axis=0)) < 0.05)
    assert np.allclose(np.cov(X.T), np.eye(2), atol=0.1)
    assert 0.45 <= rep.acceptance_rate <= 0.65


@pytest.mark.parametrize("method", ["hit-and-run", "mala"])
def test_uniform_on_box(method):
    dom = Box(NormSpec.lp(2, 2), [0, 0], [1, 1])
    t = _target(lambda X: np.zeros(np.atleast_2d(X).shape[0]), dom, 0.0, lambda X: np.zeros_like(X))
    X, _ = sample(t, SamplerConfig(method=method, n_samples=10_000, seed=5, thinning=4 if method == "mala" else None))
    for j in range(2):
        assert stats.kstest(X[:, j], "uniform").statistic < 0.03


def test_hit_and_run_in_one_dimension_is_exact():
    dom = interval(-3, 3)
    phi = lambda X: 2 * np.abs(np.reshape(X, -1) - 0.4) + np.reshape(X, -1) ** 2
    t = _target(phi, dom, 2.0, breakpoints=np.array([0.4]))
    X, _ = sample(t, SamplerConfig(n_samples=20_000, seed=6))
    Y, _ = sample(t, SamplerConfig(method="exact-1d", n_samples=20_000, seed=7))
    assert stats.ks_2samp(X[:, 0], Y[:, 0]).pvalue > 1e-3


@pytest.mark.parametrize("method", ["hit-and-run", "mala", "exact-1d"])
def test_seed_reproducibility(method):
    dom = interval(-3, 3) if method == "exact-1d" else Ball(NormSpec.lp(1.5, 3), np.zeros(3), 2.0)
    t = _target(lambda X: np.sum(np.atleast_2d(X) ** 2, axis=1), dom, 2.0, lambda X: 2 * np.asarray(X))
    cfg = SamplerConfig(method=method, n_samples=50, seed=123)
    a, _ = sample(t, cfg)
    b, _ = sample(t, cfg)
    c, _ = sample(t, SamplerConfig(method=method, n_samples=50, seed=124))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("method", ["hit-and-run", "mala", "exact-1d"])
def test_query_accounting(method):
    dom = interval(-2, 2) if method == "exact-1d" else Ball(NormSpec.lp(2, 2), np.zeros(2), 2.0)
    calls = {"rows": 0}

    def nld(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if dom.dim == 1:
            X = X.reshape(-1, 1)
        calls["rows"] += X.shape[0]
        return np.sum(X ** 2, axis=1)

    t = _target(nld, dom, 2.0, lambda X: 2 * np.asarray(X))
    _, rep = sample(t, SamplerConfig(method=method, n_samples=20, seed=0))
    assert rep.value_queries == calls["rows"]


def test_query_counter_counts_rows():
    qc = QueryCounter(lambda X: np.sum(np.atleast_2d(X), axis=1))
    qc(np.ones((5, 2)))
    qc(np.ones((1, 2)))
    assert qc.count == 6


def test_shift_invariance_of_chain():
    dom = Ball(NormSpec.lp(1.5, 2), np.zeros(2), 1.5)
    f = lambda X: 3 * np.abs(np.atleast_2d(X) @ np.array([1.0, -0.5]) - 0.2) + np.sum(np.atleast_2d(X) ** 2, 1)
    a, _ = sample(_target(f, dom), SamplerConfig(n_samples=200, seed=9))
    b, _ = sample(_target(lambda X: f(X) + 1e3, dom), SamplerConfig(n_samples=200, seed=9))
    assert np.allclose(a, b, atol=1e-9)


def test_query_budget_exceeded():
    with pytest.raises(SamplerError) as info:
        sample(_gauss_ball(), SamplerConfig(n_samples=100, max_queries=500))
    assert info.value.report.value_queries <= 500 + 200


def test_tv_distance_examples():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(100_000)
    assert tv_distance_estimate(x, special.ndtr, bins=50, range=(-5, 5)) < 0.02
    y = rng.uniform(10, 11, 5000)
    assert tv_distance_estimate(rng.uniform(0, 1, 5000), y, bins=20) == pytest.approx(1.0)
    z = rng.standard_normal(1_000_000)
    est = tv_distance_estimate(z, lambda t: special.ndtr(t - 0.1), bins=200, range=(-6, 6))
    assert abs(est - (2 * special.ndtr(0.05) - 1)) < 0.01
    with pytest.raises(ValueError):
        tv_distance_estimate(x, special.ndtr, bins=5)


def test_tv_distance_density_2d():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (200_000, 2))
    assert tv_distance_estimate(X, lambda P: np.ones(len(P)), bins=10, range=[(0, 1), (0, 1)],
                                kind="density") < 0.02


def test_ess_and_geweke():
    rng = np.random.default_rng(2)
    iid = rng.standard_normal(20_000)
    assert effective_sample_size(iid) == pytest.approx(20_000, rel=0.1)
    ar = np.zeros(20_000)
    for i in range(1, ar.size):
        ar[i] = 0.9 * ar[i - 1] + rng.standard_normal()
    # AR(1) with rho = 0.9: ESS ~ n (1 - rho) / (1 + rho).
    assert effective_sample_size(ar) == pytest.approx(20_000 * 0.1 / 1.9, rel=0.35)
    assert abs(geweke_z(iid)) < 4
    assert abs(geweke_z(np.linspace(0, 10, 5000) + rng.standard_normal(5000) * 0.01)) > 5


@settings(max_examples=5)
@given(st.integers(0, 2 ** 32 - 1))
def test_exact_sampler_tv_property(seed):
    rng = np.random.default_rng(seed)
    mu = float(rng.uniform(0.5, 4))
    c = float(rng.uniform(-1, 1))
    phi = lambda t: 0.5 * mu * t * t + np.abs(t - c)
    dens = GibbsDensity1D(phi, -8, 8, breakpoints=[c])
    x = sample_exact_1d(phi, (-8, 8), 50_000, seed=seed, breakpoints=[c])
    assert tv_distance_estimate(x, dens.cdf, bins=40, range=(-8, 8)) < 0.02
