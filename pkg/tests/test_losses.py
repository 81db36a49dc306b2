import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpnormopt.geometry import Ball, NormSpec, interval, norm_value
from dpnormopt.losses import (LossModel, PopulationSpec, Sample, dual_maximizer, empirical_risk, lipschitz_audit,
                              lipschitz_ratio, load_dataset_csv, neighboring_perturbation, planted_abs_linear,
                              point_mass, population_risk_estimate, save_dataset_csv, signed_basis,
                              spiked_features)

seeds = st.integers(0, 2 ** 32 - 1)
families = st.sampled_from(["linear", "abs-linear", "hinge"])


def _random_model(rng, family, spec, n=7):
    A = rng.standard_normal((n, spec.dim))
    b = rng.standard_normal(n)
    if family == "hinge":
        b = np.sign(b)
    return LossModel(family, A, b, spec)


def test_empirical_risk_examples():
    spec = NormSpec.lp(2, 3)
    m = LossModel("linear", np.tile([1.0, 0, 0], (4, 1)), None, spec)
    assert empirical_risk(m, [2, 0, 0]) == 2.0
    m = LossModel("abs-linear", [[1.0, 0.0]], [1.0], NormSpec.lp(2, 2))
    assert empirical_risk(m, [3, 0]) == 2.0
    m = LossModel("hinge", [[1.0, 0.0]], [1.0], NormSpec.lp(2, 2))
    assert empirical_risk(m, [5, 0]) == 0.0


def test_model_validation():
    with pytest.raises(ValueError):
        LossModel("square", [[1.0]], [0.0], NormSpec.lp(2, 1))
    with pytest.raises(ValueError):
        LossModel("linear", np.zeros((0, 2)), None, NormSpec.lp(2, 2))
    with pytest.raises(ValueError):
        LossModel("linear", [[1.0, 2.0, 3.0]], None, NormSpec.lp(2, 2))


def test_lipschitz_constant_is_max_dual_norm():
    rng = np.random.default_rng(0)
    spec = NormSpec.lp(1.5, 4)
    A = rng.standard_normal((10, 4))
    m = LossModel("abs-linear", A, rng.standard_normal(10), spec)
    q = 3.0
    assert m.G == pytest.approx(np.max(np.sum(np.abs(A) ** q, axis=1) ** (1 / q)), rel=1e-13)


def test_population_examples():
    spec = NormSpec.lp(2, 2)
    pm = point_mass([1.0, 2.0], 0.5)
    mean, se = population_risk_estimate(pm, "abs-linear", [1.0, 1.0], 50, seed=0)
    assert mean == pytest.approx(2.5) and se == 0.0
    mean, se = population_risk_estimate(signed_basis(2), "abs-linear", [1.0, 0.0], 4000, seed=1)
    assert abs(mean - 1.0) <= 3 * se + 1e-12
    centred = PopulationSpec(lambda rng, m: (rng.standard_normal((m, 2)), np.zeros(m)))
    mean, se = population_risk_estimate(centred, "linear", [0.7, -0.3], 200_000, seed=2)
    assert abs(mean) <= 4 * se
    with pytest.raises(ValueError):
        population_risk_estimate(pm, "linear", [0, 0], 1, seed=0)


def test_population_estimate_reproducible():
    pop = spiked_features(NormSpec.lp(1.5, 3))
    a = population_risk_estimate(pop, "linear", [0.1, 0.2, 0.3], 1000, seed=42)
    b = population_risk_estimate(pop, "linear", [0.1, 0.2, 0.3], 1000, seed=42)
    assert a == b


def test_planted_minimizer_is_population_optimum():
    spec = NormSpec.lp(1.5, 3)
    x_star = np.array([0.3, -0.1, 0.0])
    pop = planted_abs_linear(spec, x_star)
    f_star, _ = population_risk_estimate(pop, "abs-linear", x_star, 2000, seed=0)
    assert f_star == 0.0
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = x_star + 0.2 * rng.standard_normal(3)
        assert population_risk_estimate(pop, "abs-linear", x, 2000, seed=0)[0] > 0
    A, _ = pop.draw(rng, 100)
    assert np.allclose(norm_value(spec.dual(), A), 1.0)


def test_spiked_features_have_unit_dual_norm():
    spec = NormSpec.lp(1.5, 5)
    A, b = spiked_features(spec).draw(np.random.default_rng(0), 200)
    assert np.allclose(norm_value(spec.dual(), A), 1.0) and np.all(b == 0)


def test_lipschitz_audit_examples():
    spec = NormSpec.lp(1.5, 3)
    a = dual_maximizer(spec.dual(), np.array([1.0, -2.0, 0.5]))  # any direction, rescaled below
    a = a / norm_value(spec.dual(), a)
    m = LossModel("linear", [a], None, spec)
    assert lipschitz_audit(m, 500, seed=0) <= 1.0 * (1 + 1e-9)
    m = LossModel("abs-linear", [2 * a], [0.1], spec)
    worst = lipschitz_audit(m, 500, seed=0)
    assert 2 - 1e-3 <= worst <= 2 * (1 + 1e-9)
    rng = np.random.default_rng(3)
    m = _random_model(rng, "hinge", spec, n=9)
    assert lipschitz_audit(m, 500, seed=1) <= m.G * (1 + 1e-9)


def test_neighboring_examples():
    rng = np.random.default_rng(0)
    spec = NormSpec.lp(2, 2)
    m = _random_model(rng, "abs-linear", spec)
    same = neighboring_perturbation(m, 0, Sample(m.A[0], m.b[0]))
    X = rng.standard_normal((20, 2))
    assert np.array_equal(same.value(X), m.value(X))
    one = LossModel("hinge", [[1.0, 0.0]], [1.0], spec)
    rep = neighboring_perturbation(one, 0, Sample(np.array([0.0, 2.0]), -1.0))
    alone = LossModel("hinge", [[0.0, 2.0]], [-1.0], spec)
    assert np.array_equal(rep.value(X), alone.value(X))
    with pytest.raises((IndexError, ValueError)):
        neighboring_perturbation(m, 99, Sample(m.A[0], m.b[0]))


def test_swap_difference_bounded_by_grid_scan():
    # d = 1: sup |F_D - F_D'| over an anchored grid is at most 2 G diam / n.
    rng = np.random.default_rng(4)
    spec = NormSpec.lp(2, 1)
    for family in ("linear", "abs-linear", "hinge"):
        m = _random_model(rng, family, spec, n=6)
        nb = neighboring_perturbation(m, 2, Sample(rng.uniform(-1, 1, 1), 1.0))
        G = max(m.G, nb.G)
        xs = np.linspace(-1.5, 1.5, 3001)[:, None]
        diff = m.value(xs) - nb.value(xs)
        # Anchoring at the centre removes the constant part of the difference.
        diff = diff - (m.value(np.zeros((1, 1))) - nb.value(np.zeros((1, 1))))
        assert np.max(np.abs(diff)) <= 2 * G * 3.0 / m.n + 1e-12


@given(seeds, families, st.sampled_from([NormSpec.lp(1.5, 3), NormSpec.lp(1, 2), NormSpec.lp(3, 2)]))
def test_empirical_risk_is_convex(seed, family, spec):
    rng = np.random.default_rng(seed)
    m = _random_model(rng, family, spec)
    X, Y = rng.standard_normal((2, 50, spec.dim))
    t = rng.uniform(0, 1, (50, 1))
    lhs = m.value(t * X + (1 - t) * Y)
    rhs = t[:, 0] * m.value(X) + (1 - t[:, 0]) * m.value(Y)
    assert np.all(lhs <= rhs + 1e-10 * (1 + np.abs(rhs)))


@given(seeds, families)
def test_swap_difference_is_2G_over_n_lipschitz(seed, family):
    rng = np.random.default_rng(seed)
    spec = NormSpec.lp(1.5, 3)
    m = _random_model(rng, family, spec, n=5)
    b_new = 1.0 if family == "hinge" else float(rng.standard_normal())
    nb = neighboring_perturbation(m, int(rng.integers(5)), Sample(rng.standard_normal(3), b_new))
    G = max(m.G, nb.G)
    dom = Ball(spec, np.zeros(3), 2.0)
    ratio = lipschitz_ratio(lambda X: m.value(X) - nb.value(X), dom, spec, rng, 300)
    assert ratio <= 2 * G / m.n * (1 + 1e-9)


def test_linear_fast_path_matches_per_sample_mean():
    rng = np.random.default_rng(7)
    m = _random_model(rng, "linear", NormSpec.lp(1.5, 4), n=11)
    X = rng.standard_normal((9, 4))
    assert np.allclose(m.value(X), m.sample_losses(X).mean(axis=1), rtol=1e-13, atol=1e-14)


def test_csv_round_trip_and_validation(tmp_path):
    rng = np.random.default_rng(8)
    spec = NormSpec.lp(2, 3)
    m = _random_model(rng, "abs-linear", spec)
    path = tmp_path / "data.csv"
    save_dataset_csv(m, path)
    back = load_dataset_csv(path, spec, "abs-linear")
    assert np.array_equal(back.A, m.A) and np.array_equal(back.b, m.b)
    with pytest.raises(ValueError):
        load_dataset_csv(path, NormSpec.lp(2, 4), "abs-linear")
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        load_dataset_csv(bad, NormSpec.lp(2, 2), "linear")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError):
        load_dataset_csv(empty, NormSpec.lp(2, 2), "linear")


def test_interval_domain_for_one_dimension():
    assert interval(-1, 1).dim == 1
