import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from dpnormopt.audit import (AuditReport, AuditRow, PrivacyCurve1D, admissible_shift, audit_theorem_gdp,
                             concentration_check, fact_gaussian_audit, gaussian_curve, generate_audit_instances,
                             gibbs_risk_check, kmudef_audit, laplace_gap, mechanism_privacy_audit,
                             privacy_curve_1d, random_mechanism_instances, random_risk_targets,
                             strongly_convex_1d_targets, tight_instance, write_audit_csv)
from dpnormopt.geometry import Ball, Box, NormSpec


def _mp_gaussian_curve(t, eps):
    mp.mp.dps = 40
    t, eps = mp.mpf(t), mp.mpf(eps)
    return float(mp.ncdf(t / 2 - eps / t) - mp.e ** eps * mp.ncdf(-t / 2 - eps / t))


def test_gaussian_curve_examples():
    assert gaussian_curve(2.0, 0.0) == pytest.approx(0.682689, abs=1e-6)
    assert gaussian_curve(1.0, 2.5) <= 0.067668
    assert gaussian_curve(0.0, 1.0) == 0.0
    assert gaussian_curve(-1.0, 0.5) == gaussian_curve(1.0, 0.5)


@given(st.floats(0.01, 10.0), st.floats(0.0, 10.0))
def test_gaussian_curve_matches_high_precision(t, eps):
    assert gaussian_curve(t, eps) == pytest.approx(_mp_gaussian_curve(t, eps), abs=1e-13)


@given(st.floats(0.01, 10.0), st.floats(0.0, 5.0), st.floats(0.01, 2.0))
def test_gaussian_curve_monotone(t, eps, step):
    assert gaussian_curve(t, eps + step) <= gaussian_curve(t, eps) + 1e-15
    assert gaussian_curve(t + step, eps) >= gaussian_curve(t, eps) - 1e-15


@given(st.floats(1e-12, 0.4), st.floats(0.01, 10.0))
def test_admissible_shift_is_admissible(delta, eps):
    A = admissible_shift(delta, eps)
    L = math.log(1 / (2 * delta))
    assert A == pytest.approx(math.sqrt(2 * L + 2 * eps) - math.sqrt(2 * L), rel=1e-9)
    assert gaussian_curve(A, eps) <= delta + 1e-12


def test_privacy_curve_1d_gaussian_shift():
    # Truncation at +-12 sd is negligible; compare with the closed form.
    for t, eps in ((0.5, 0.1), (1.0, 1.0), (2.0, 0.5)):
        got = privacy_curve_1d(lambda x: 0.5 * x * x, lambda x, t=t: 0.5 * (x - t) ** 2, (-14, 14), eps)
        assert got == pytest.approx(gaussian_curve(t, eps), abs=1e-9)


def test_privacy_curve_1d_identical_and_disjointish():
    f = lambda x: np.abs(x)
    assert privacy_curve_1d(f, f, (-3, 3), 0.0) == 0.0
    # Uniform on [0, 1] versus exp(-x) restricted to [0, 1]: direct formula at eps = 0.
    got = privacy_curve_1d(lambda x: np.zeros_like(x), lambda x: x, (0, 1), 0.0)
    Z = 1 - math.exp(-1)
    x0 = -math.log(Z)  # q > p on [0, x0)
    assert got == pytest.approx((1 - math.exp(-x0)) / Z - x0, abs=1e-10)


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6))
def test_privacy_curve_monotone_in_epsilon(seed):
    inst = generate_audit_instances(1, seed)[0]
    curve = PrivacyCurve1D(inst.F, inst.F_tilde, inst.interval, breakpoints=inst.breakpoints)
    vals = [curve.delta(e) for e in np.linspace(0, 3, 7)]
    assert all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))


def test_tight_instance_matches_gaussian():
    for mu, G in ((1.0, 1.0), (4.0, 0.5), (0.5, 2.0)):
        rep = audit_theorem_gdp(tight_instance(mu, G), [0.0, 0.5, 1.0, 2.0])
        for row in rep.rows:
            assert abs(row.lhs_delta - row.rhs_delta) <= 1e-6


def test_constant_alpha_gives_zero():
    inst = tight_instance(2.0, 1.0)
    from dataclasses import replace

    const = replace(inst, alpha_slopes=np.array([0.0]), alpha_offset=5.0)
    # eps = 0 is degenerate here: the log-ratio is rounding noise around zero.
    rep = audit_theorem_gdp(const, [1e-6, 1.0])
    assert all(r.lhs_delta <= 1e-12 for r in rep.rows)


def test_random_instances_satisfy_domination():
    insts = generate_audit_instances(6, seed=3)
    assert all(i.check()["ok"] for i in insts)
    for inst in insts:
        assert audit_theorem_gdp(inst, [0.0, 0.5, 1.5, 3.0]).passed


def test_flipped_audit_detects_violation():
    rep = audit_theorem_gdp(generate_audit_instances(1, seed=4)[0], [0.5], flip=True)
    assert not rep.passed


def test_instance_generation_deterministic():
    a = generate_audit_instances(3, seed=11)
    b = generate_audit_instances(3, seed=11)
    for x, y in zip(a, b):
        assert x.mu == y.mu and np.array_equal(x.abs_knots, y.abs_knots)
    assert generate_audit_instances(0, seed=1) == []
    with pytest.raises(ValueError):
        generate_audit_instances(-1, seed=1)


def test_risk_examples():
    lap = gibbs_risk_check(np.abs, (-1, 1), 10.0, 1, breakpoints=[0.0])
    assert lap.gap == pytest.approx(laplace_gap(10.0), abs=1e-9)
    assert lap.gap == pytest.approx(0.0999546, abs=1e-7)
    assert lap.passed and lap.bound == pytest.approx(0.1)
    const = gibbs_risk_check(lambda x: np.zeros_like(np.asarray(x, dtype=float)), (-1, 1), 5.0, 1)
    assert const.gap == pytest.approx(0.0, abs=1e-12)
    quad = gibbs_risk_check(lambda X: 0.5 * np.sum(np.atleast_2d(X) ** 2, axis=1),
                            Ball(NormSpec.lp(2, 2), np.zeros(2), 20.0), 1.0, 2)
    assert quad.gap == pytest.approx(1.0, abs=1e-6)  # d / (2k) with d = 2, k = 1
    assert quad.passed


def test_laplace_gap_against_mpmath():
    mp.mp.dps = 30
    for k in (0.5, 3.0, 40.0):
        num = mp.quad(lambda x: abs(x) * mp.e ** (-k * abs(x)), [-1, 0, 1])
        den = mp.quad(lambda x: mp.e ** (-k * abs(x)), [-1, 0, 1])
        assert laplace_gap(k) == pytest.approx(float(num / den), rel=1e-12)


def test_random_risk_targets_within_bound():
    for tgt in random_risk_targets(6, seed=5):
        r = gibbs_risk_check(tgt["F"], tgt["domain"], tgt["k"], tgt["dim"], breakpoints=tgt["breakpoints"])
        assert r.passed, (r.gap, r.bound)


def test_mc_risk_three_dimensions():
    dom = Box(NormSpec.lp(2, 3), [-1, -1, -1], [1, 1, 1])
    F = lambda X: np.sum(np.abs(np.atleast_2d(X)), axis=1)
    r = gibbs_risk_check(F, dom, 8.0, 3, method="mc", n_samples=3000, seed=1)
    # Independent coordinates: the exact gap is three Laplace gaps.
    assert r.gap == pytest.approx(3 * laplace_gap(8.0), abs=4 * r.stderr + 1e-3)
    assert r.passed


def test_concentration_examples():
    tg = strongly_convex_1d_targets(1, seed=0)[0]
    rows = concentration_check(tg["target"], lambda X: np.reshape(X, -1), 1.0,
                               [0.5 / math.sqrt(tg["mu"]), 1 / math.sqrt(tg["mu"])], 20_000, seed=1)
    assert all(r.passed for r in rows)
    assert rows[0].bound == pytest.approx(math.exp(-0.125))
    with pytest.raises(ValueError):
        from dpnormopt.mechanism import GibbsTarget
        from dpnormopt.geometry import interval

        flat = GibbsTarget(lambda X: np.zeros(len(np.reshape(X, -1))), None, interval(0, 1), 0.0, 0.0, 1)
        concentration_check(flat, lambda X: X, 1.0, [0.1], 10, seed=0)


def test_fact_and_kmudef_audits_pass():
    f = fact_gaussian_audit(200, seed=0)
    assert f.passed and len(f.rows) == 200
    k = kmudef_audit(200, seed=0)
    assert k.passed


def test_mechanism_privacy_audit_small():
    insts = random_mechanism_instances(4, seed=2)
    rep = mechanism_privacy_audit(insts)
    assert rep.passed and len(rep.rows) == 8
    assert random_mechanism_instances(0, seed=2) == []


def test_report_and_csv(tmp_path):
    rep = AuditReport("x", [AuditRow(1, 0.5, 0.1, 0.2, True), AuditRow(2, 1.0, 0.3, 0.2, False)])
    assert not rep.passed and rep.worst_margin == pytest.approx(-0.1)
    assert AuditReport("empty").passed and AuditReport("empty").worst_margin == math.inf
    path = tmp_path / "a.csv"
    write_audit_csv(rep.rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "instance_id,epsilon,lhs_delta,rhs_delta,margin,pass"
    assert lines[2].endswith(",0")
