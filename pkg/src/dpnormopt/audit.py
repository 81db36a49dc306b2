"""Numerical audits of the privacy-curve, Gibbs-risk and concentration inequalities.

Everything here is one-dimensional (or two-dimensional for the risk check):
densities are normalised by adaptive quadrature and privacy curves are computed
exactly on the likelihood-ratio superlevel set.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, special

from . import quadrature
from .geometry import Ball, Box, Domain, NormSpec, bounding_box, chord_intersect, interval
from .losses import LossModel, Sample, neighboring_perturbation
from .mechanism import (GibbsTarget, build_target, erm_params, kinks_1d, kmudef_mu, log_term, split_delta)
from .regularizers import regularizer_for_lp
from .samplers import GibbsDensity1D, SamplerConfig, sample

ROOT_TOL = 1e-12
MAX_SIGN_CHANGES = 64
AUDIT_CSV_HEADER = ("instance_id", "epsilon", "lhs_delta", "rhs_delta", "margin", "pass")


class AuditError(RuntimeError):
    pass


# --- Gaussian privacy curve ---------------------------------------------------------


def gaussian_curve(t: float, epsilon: float) -> float:
    """delta(N(0,1) || N(t,1))(eps) = Phi(t/2 - eps/t) - e^eps Phi(-t/2 - eps/t)."""
    t = abs(float(t))
    if t == 0.0:
        return 0.0
    a = t / 2.0 - epsilon / t
    b = -t / 2.0 - epsilon / t
    val = special.ndtr(a) - math.exp(epsilon + special.log_ndtr(b))
    return float(min(max(val, 0.0), 1.0))


def admissible_shift(delta: float, epsilon: float) -> float:
    """Largest Gaussian shift t with gaussian_curve(t, eps) <= delta by the closed-form sufficient condition."""
    L = log_term(delta)
    # Same value as sqrt(2L + 2eps) - sqrt(2L), written without cancellation.
    return 2.0 * epsilon / (math.sqrt(2.0 * L + 2.0 * epsilon) + math.sqrt(2.0 * L))


# --- exact privacy curves of 1D densities --------------------------------------------


class PrivacyCurve1D:
    """delta(P || Q)(eps) for densities exp(-P_neg_log), exp(-Q_neg_log) on [a, b].

    The optimal event is S* = {log q - log p > eps}; its boundary is bracketed on a
    regular grid and refined by bisection, and q - e^eps p is integrated on each
    component of S* by adaptive quadrature.
    """

    def __init__(self, P_neg_log: Callable, Q_neg_log: Callable, interval_: Sequence[float],
                 tol: float = 1e-10, breakpoints=None, grid: int = 4096):
        a, b = float(interval_[0]), float(interval_[1])
        self.a, self.b = a, b
        self.tol = tol
        self.bp = None if breakpoints is None else np.asarray(breakpoints, dtype=float).ravel()
        try:
            self.P = GibbsDensity1D(P_neg_log, a, b, tol=tol, breakpoints=self.bp)
            self.Q = GibbsDensity1D(Q_neg_log, a, b, tol=tol, breakpoints=self.bp)
        except quadrature.QuadratureError as exc:
            raise AuditError(f"normalisation failed: {exc}") from exc
        g = np.linspace(a, b, grid)
        if self.bp is not None:
            g = np.unique(np.concatenate([g, self.bp[(self.bp > a) & (self.bp < b)]]))
        self.grid = g
        self.base = self._log_ratio(g)

    def _log_ratio(self, x):
        return self.Q.logpdf(x) - self.P.logpdf(x)

    def superlevel_set(self, epsilon: float) -> list[tuple[float, float]]:
        h = self.base - epsilon
        pos = h > 0
        changes = np.nonzero(pos[1:] != pos[:-1])[0]
        if changes.size > MAX_SIGN_CHANGES:
            raise AuditError(f"{changes.size} sign changes of the log-ratio (limit {MAX_SIGN_CHANGES})")
        roots = []
        for i in changes:
            lo, hi = self.grid[i], self.grid[i + 1]
            s_lo = pos[i]
            while hi - lo > ROOT_TOL:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if (self._log_ratio(np.array([mid]))[0] - epsilon > 0) == s_lo:
                    lo = mid
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
        edges = [self.a] + roots + [self.b]
        inside = bool(pos[0])
        out = []
        for l, r in zip(edges[:-1], edges[1:]):
            if inside and r > l:
                out.append((l, r))
            inside = not inside
        return out

    def delta(self, epsilon: float) -> float:
        comps = self.superlevel_set(epsilon)
        if not comps:
            return 0.0
        e = math.exp(epsilon)
        P, Q = self.P, self.Q

        def integrand(t):
            return np.exp(-(Q._phi(t) - Q.shift)) / Q.Z - e * np.exp(-(P._phi(t) - P.shift)) / P.Z

        total = 0.0
        for l, r in comps:
            inner = None
            if self.bp is not None:
                inner = self.bp[(self.bp > l) & (self.bp < r)]
            try:
                part = quadrature.adaptive_partition(integrand, l, r, rel_tol=self.tol, abs_tol=1e-15,
                                                     breakpoints=inner)
            except quadrature.QuadratureError as exc:
                raise AuditError(f"privacy-curve integral failed on [{l}, {r}]: {exc}") from exc
            total += part.total
        return float(min(max(total, 0.0), 1.0))


def privacy_curve_1d(P_neg_log: Callable, Q_neg_log: Callable, interval_, epsilon: float, tol: float = 1e-10,
                     breakpoints=None) -> float:
    """delta(P || Q)(eps), clamped to [0, 1]."""
    return PrivacyCurve1D(P_neg_log, Q_neg_log, interval_, tol, breakpoints).delta(epsilon)


# --- randomised 1D instances ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AuditInstance1D:
    """F = mu x^2/2 + lin x + sum w_i |x - c_i| + sum v_j max(0, s_j (x - e_j))^2 and a piecewise-linear alpha."""

    mu: float
    G: float
    interval: tuple
    lin: float
    abs_knots: np.ndarray
    abs_weights: np.ndarray
    hinge_knots: np.ndarray
    hinge_weights: np.ndarray
    hinge_sides: np.ndarray
    alpha_knots: np.ndarray
    alpha_slopes: np.ndarray  # len(alpha_knots) + 1 slopes, left to right
    alpha_offset: float = 0.0
    instance_id: int = 0

    def F(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.5 * self.mu * x * x + self.lin * x
        for c, w in zip(self.abs_knots, self.abs_weights):
            out = out + w * np.abs(x - c)
        for e, v, s in zip(self.hinge_knots, self.hinge_weights, self.hinge_sides):
            out = out + v * np.maximum(0.0, s * (x - e)) ** 2
        return out

    def alpha(self, x):
        x = np.asarray(x, dtype=float)
        s = self.alpha_slopes
        out = self.alpha_offset + s[0] * x
        for j, t in enumerate(self.alpha_knots):
            out = out + (s[j + 1] - s[j]) * np.maximum(0.0, x - t)
        return out

    def F_tilde(self, x):
        return self.F(x) + self.alpha(x)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self.abs_knots, self.hinge_knots, self.alpha_knots]))

    def check(self, points: int = 2001) -> dict:
        """Numerical invariant checks: strong convexity of F and F + alpha, Lipschitz alpha."""
        a, b = self.interval
        x = np.linspace(a, b, points)
        h = x[1] - x[0]
        out = {}
        for name, f in (("F", self.F), ("F_tilde", self.F_tilde)):
            sd = f(x[:-2]) + f(x[2:]) - 2.0 * f(x[1:-1])
            scale = 1.0 + np.abs(f(x[1:-1]))
            out[name] = float(np.min((sd - self.mu * h * h) / scale))
        slopes = np.diff(self.alpha(x)) / h
        out["alpha_lipschitz"] = float(np.max(np.abs(slopes)))
        out["ok"] = bool(out["F"] >= -1e-9 and out["F_tilde"] >= -1e-9 and out["alpha_lipschitz"] <= self.G * (1 + 1e-9))
        return out


def _random_instance(rng: np.random.Generator, mu_range, G_range, interval_, instance_id: int) -> AuditInstance1D:
    a, b = interval_
    width = b - a
    mu = float(rng.uniform(*mu_range))
    G = float(rng.uniform(*G_range))
    m = int(rng.integers(3, 9))
    knots = np.sort(rng.uniform(a + 0.05 * width, b - 0.05 * width, size=m))
    is_abs = rng.uniform(size=m) < 0.6
    is_abs[rng.integers(m)] = True
    abs_knots = knots[is_abs]
    abs_w = rng.uniform(0.05, 1.5, size=abs_knots.size) * G
    hinge_knots = knots[~is_abs]
    hinge_w = rng.uniform(0.0, 2.0, size=hinge_knots.size) * mu
    hinge_s = rng.choice([-1.0, 1.0], size=hinge_knots.size)
    lin = float(rng.uniform(-1.0, 1.0)) * mu * 0.25 * width
    # alpha: concave kinks only at abs knots, bounded by the kink they cancel; convex kinks anywhere.
    extra = np.sort(rng.uniform(a, b, size=int(rng.integers(0, 4))))
    a_knots = np.concatenate([abs_knots, extra])
    allow_drop = np.concatenate([2.0 * abs_w, np.zeros(extra.size)])
    order = np.argsort(a_knots)
    a_knots, allow_drop = a_knots[order], allow_drop[order]
    slopes = [float(rng.uniform(-G, G))]
    for drop in allow_drop:
        lo = -min(drop, slopes[-1] + G)
        hi = G - slopes[-1]
        step = float(rng.uniform(lo, max(hi, lo)))
        slopes.append(float(np.clip(slopes[-1] + step, -G, G)))
    return AuditInstance1D(mu, G, (float(a), float(b)), lin, abs_knots, abs_w, hinge_knots, hinge_w, hinge_s,
                           a_knots, np.array(slopes), float(rng.normal()), instance_id)


def generate_audit_instances(count: int, seed, mu_range=(0.5, 4.0), G_range=(0.2, 3.0),
                             interval_=(-4.0, 4.0), max_tries: int = 100) -> list[AuditInstance1D]:
    """Random strongly convex F and Lipschitz alpha with F + alpha strongly convex (verified)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if min(mu_range) <= 0 or min(G_range) <= 0:
        raise ValueError("ranges must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        for _ in range(max_tries):
            inst = _random_instance(rng, mu_range, G_range, interval_, i)
            if inst.check()["ok"]:
                out.append(inst)
                break
        else:
            raise AuditError(f"could not build a valid instance {i} in {max_tries} tries")
    return out


def tight_instance(mu: float, G: float, width_sd: float = 12.0, instance_id: int = -1) -> AuditInstance1D:
    """F = mu x^2/2, alpha = G x on an interval wide enough that truncation is negligible."""
    sd = 1.0 / math.sqrt(mu)
    shift = G / mu
    a, b = -width_sd * sd - shift, width_sd * sd + shift
    e = np.empty(0)
    return AuditInstance1D(mu, G, (a, b), 0.0, e, e, e, e, e, e, np.array([G]), 0.0, instance_id)


@dataclass
class AuditRow:
    instance_id: object
    epsilon: float
    lhs_delta: float
    rhs_delta: float
    passed: bool
    ordering: str = "P||Q"

    @property
    def margin(self) -> float:
        return self.rhs_delta - self.lhs_delta


@dataclass
class AuditReport:
    name: str
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst_margin(self) -> float:
        return min((r.margin for r in self.rows), default=float("inf"))

    def extend(self, other: "AuditReport"):
        self.rows.extend(other.rows)
        self.notes.extend(other.notes)


def audit_theorem_gdp(instance: AuditInstance1D, epsilons: Sequence[float], tol: float = 1e-8,
                      quad_tol: float = 1e-10, flip: bool = False) -> AuditReport:
    """Check delta(P||Q)(eps) <= gaussian_curve(G / sqrt(mu), eps) + tol for both orderings.

    ``flip`` reverses the inequality (harness self-test only).
    """
    t = instance.G / math.sqrt(instance.mu)
    rep = AuditReport("gaussian-domination")
    bps = instance.breakpoints
    for label, P, Q in (("P||Q", instance.F, instance.F_tilde), ("Q||P", instance.F_tilde, instance.F)):
        curve = PrivacyCurve1D(P, Q, instance.interval, tol=quad_tol, breakpoints=bps)
        for eps in epsilons:
            lhs = curve.delta(eps)
            rhs = gaussian_curve(t, eps)
            ok = (rhs <= lhs + tol) if flip else (lhs <= rhs + tol)
            rep.rows.append(AuditRow(instance.instance_id, float(eps), lhs, rhs, bool(ok), label))
    return rep


# --- Gibbs risk -----------------------------------------------------------------------


@dataclass
class RiskCheck:
    gap: float
    bound: float
    passed: bool
    stderr: float = 0.0
    minimum: float = float("nan")


def _min_1d(F, a, b, breakpoints=None) -> float:
    x = np.linspace(a, b, 20001)
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float)
        x = np.concatenate([x, bp[(bp >= a) & (bp <= b)]])
    vals = np.asarray(F(x), dtype=float)
    i = int(np.argmin(vals))
    best = float(vals[i])
    xs = np.sort(x)
    j = int(np.searchsorted(xs, x[i]))
    lo, hi = xs[max(j - 2, 0)], xs[min(j + 2, xs.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: float(F(np.array([t]))[0]), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13})
        best = min(best, float(res.fun))
    return best


def _min_nd(F, dom: Domain, rng: np.random.Generator) -> float:
    lo, hi = bounding_box(dom)
    X = dom.sample_points(rng, 4000)
    vals = np.asarray(F(X), dtype=float)
    x0 = X[int(np.argmin(vals))]
    best = float(vals.min())

    def f(x):
        if isinstance(dom, Box):
            x = np.clip(x, dom.lo, dom.hi)
        elif dom.gauge(x[None, :])[0] > 0:
            return 1e300
        return float(np.asarray(F(x[None, :]), dtype=float)[0])

    res = optimize.minimize(f, x0, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000, "maxfev": 40000})
    return min(best, float(res.fun))


def gibbs_risk_check(F: Callable, domain, k: float, dim: int, method: str = "quadrature",
                     breakpoints=None, tol: float = 1e-8, quad_tol: float = 1e-10, n_samples: int = 2000,
                     seed: int = 0, sampler_config: Optional[SamplerConfig] = None) -> RiskCheck:
    """E_nu[F] - min F for nu proportional to exp(-k F), against the bound dim / k.

    ``domain`` is an interval (a, b) or a 1D Box for dim = 1, a Box or Euclidean
    Ball for dim = 2 (nested quadrature), and any Domain for ``method="mc"``.
    ``breakpoints`` (1D) or a pair of per-axis arrays (2D) mark kinks of F.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    bound = dim / k
    if method == "mc":
        return _gibbs_risk_mc(F, domain, k, dim, n_samples, seed, sampler_config)
    if dim == 1:
        if isinstance(domain, Box):
            a, b = float(domain.lo[0]), float(domain.hi[0])
        else:
            a, b = map(float, domain)
        f1 = lambda t: np.asarray(F(np.asarray(t, dtype=float)), dtype=float)
        m = _min_1d(f1, a, b, breakpoints)
        dens = GibbsDensity1D(lambda t: k * (f1(t) - m), a, b, tol=quad_tol, breakpoints=breakpoints)
        gap = dens.expect(lambda t: f1(t) - m, tol=quad_tol)
        return RiskCheck(gap, bound, bool(gap <= bound + tol), 0.0, m)
    if dim == 2:
        m = _min_nd(lambda X: F(X), domain, np.random.default_rng(seed))
        gap = _nested_gibbs_gap(F, domain, k, m, breakpoints, quad_tol)
        return RiskCheck(gap, bound, bool(gap <= bound + tol), 0.0, m)
    raise ValueError("quadrature risk checks support dim <= 2; use method='mc'")


def _nested_gibbs_gap(F, dom, k, m, breakpoints, quad_tol) -> float:
    """E[F] - m by iterated adaptive quadrature (outer over x_1, inner over x_2)."""
    if isinstance(dom, Box):
        (a, c), (b, d) = dom.lo, dom.hi
        ylims = lambda x: (c, d)
    elif isinstance(dom, Ball) and dom.norm.p == 2 and not dom.norm.is_matrix:
        cx, cy = dom.center
        R = dom.radius
        a, b = cx - R, cx + R

        def ylims(x):
            h = math.sqrt(max(R * R - (x - cx) ** 2, 0.0))
            return cy - h, cy + h
    else:
        raise ValueError("2D quadrature supports boxes and Euclidean balls")
    bx = by = None
    if breakpoints is not None:
        bx, by = breakpoints

    def inner(xs):
        z = np.empty(xs.size)
        w = np.empty(xs.size)
        for i, x in enumerate(xs):
            lo, hi = ylims(float(x))
            if hi - lo <= 0:
                z[i] = w[i] = 0.0
                continue

            def g(y, x=x):
                pts = np.column_stack([np.full(y.size, x), y])
                return np.asarray(F(pts), dtype=float) - m

            def vals(y):
                f = g(y)
                return f, np.exp(-k * f)

            pz = quadrature.adaptive_partition(lambda y: vals(y)[1], lo, hi, rel_tol=quad_tol, breakpoints=by)
            pw = quadrature.adaptive_partition(lambda y: vals(y)[0] * vals(y)[1], lo, hi, rel_tol=quad_tol,
                                               abs_tol=1e-14 * pz.total, breakpoints=by)
            z[i] = pz.total
            w[i] = pw.total
        return z, w

    cache = {}

    def outer(which):
        def f(xs):
            key = xs.tobytes()
            if key not in cache:
                cache[key] = inner(xs)
            return cache[key][which]
        return f

    Z = quadrature.adaptive_partition(outer(0), a, b, rel_tol=quad_tol, breakpoints=bx)
    W = quadrature.adaptive_partition(outer(1), a, b, rel_tol=quad_tol, abs_tol=1e-14 * Z.total, breakpoints=bx)
    return W.total / Z.total


def _gibbs_risk_mc(F, dom, k, dim, n_samples, seed, sampler_config) -> RiskCheck:
    rng = np.random.default_rng(seed)
    m = _min_nd(F, dom, rng)
    target = GibbsTarget(lambda X: k * (np.asarray(F(np.atleast_2d(X)), dtype=float) - m), None, dom, 0.0, 0.0, dim)
    cfg = sampler_config or SamplerConfig(n_samples=n_samples, seed=seed)
    X, _ = sample(target, cfg)
    vals = np.asarray(F(X), dtype=float) - m
    from .samplers import effective_sample_size

    ess = max(effective_sample_size(vals), 2.0)
    se = float(vals.std(ddof=1) / math.sqrt(ess))
    gap = float(vals.mean())
    bound = dim / k
    return RiskCheck(gap, bound, bool(gap <= bound + 3.0 * se), se, m)


def laplace_gap(k: float) -> float:
    """E|x| under exp(-k|x|) on [-1, 1]: (1/k)(1 - (1+k) e^{-k}) / (1 - e^{-k})."""
    return (1.0 / k) * (-math.expm1(-k) - k * math.exp(-k)) / (-math.expm1(-k))


def random_risk_targets(count: int, seed) -> list[dict]:
    """Random convex 1D/2D functions with known kink locations for gibbs_risk_check."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        dim = 1 if i % 2 == 0 else 2
        k = float(np.exp(rng.uniform(np.log(0.5), np.log(50.0))))
        if dim == 1:
            a = -float(rng.uniform(0.5, 3.0))
            b = float(rng.uniform(0.5, 3.0))
            c = rng.uniform(a, b, size=int(rng.integers(1, 4)))
            w = rng.uniform(0.1, 2.0, size=c.size)
            q = float(rng.uniform(0.0, 2.0))
            s = float(rng.uniform(-1.0, 1.0))

            def F(x, c=c, w=w, q=q, s=s):
                x = np.asarray(x, dtype=float)
                return 0.5 * q * x * x + s * x + np.sum(w * np.abs(x[..., None] - c), axis=-1)

            out.append(dict(F=F, domain=(a, b), k=k, dim=1, breakpoints=c))
        else:
            lo = -rng.uniform(0.5, 2.0, size=2)
            hi = rng.uniform(0.5, 2.0, size=2)
            cx = rng.uniform(lo[0], hi[0])
            cy = rng.uniform(lo[1], hi[1])
            wx, wy = rng.uniform(0.1, 2.0, size=2)
            Q = rng.standard_normal((2, 2))
            Q = Q @ Q.T * float(rng.uniform(0.0, 1.0))
            s = rng.uniform(-1.0, 1.0, size=2)

            def F(X, cx=cx, cy=cy, wx=wx, wy=wy, Q=Q, s=s):
                X = np.atleast_2d(np.asarray(X, dtype=float))
                quad = 0.5 * np.einsum("ij,jk,ik->i", X, Q, X)
                return quad + X @ s + wx * np.abs(X[:, 0] - cx) + wy * np.abs(X[:, 1] - cy)

            dom = Box(NormSpec.lp(2, 2), lo, hi)
            out.append(dict(F=F, domain=dom, k=k, dim=2, breakpoints=(np.array([cx]), np.array([cy]))))
    return out


# --- concentration ---------------------------------------------------------------------


@dataclass
class TailRow:
    t: float
    empirical: float
    bound: float
    slack: float
    passed: bool


def concentration_check(target, ell: Callable, G_ell: float, t_grid: Sequence[float], n_samples: int, seed,
                        mean: Optional[float] = None, sampler_config: Optional[SamplerConfig] = None) -> list[TailRow]:
    """Empirical Pr[ell(X) - E ell(X) >= t] against exp(-t^2 mu / (2 G_ell^2)) plus 3 binomial sd.

    ``target.strong_convexity`` is mu. ``mean`` is E ell(X) if known exactly;
    otherwise the sample mean is used. One-dimensional targets are sampled
    exactly, others with ``sampler_config`` (default hit-and-run).
    """
    mu = float(target.strong_convexity)
    if not mu > 0:
        raise ValueError("target must be strongly logconcave")
    if sampler_config is None:
        method = "exact-1d" if target.dim == 1 else "hit-and-run"
        sampler_config = SamplerConfig(method=method, n_samples=n_samples, seed=seed)
    X, _ = sample(target, sampler_config)
    vals = np.asarray(ell(X), dtype=float).reshape(-1)
    m = float(vals.mean()) if mean is None else float(mean)
    N = vals.size
    rows = []
    for t in t_grid:
        emp = float(np.mean(vals - m >= t))
        bound = math.exp(-t * t * mu / (2.0 * G_ell * G_ell))
        slack = 3.0 * math.sqrt(bound * (1.0 - bound) / N)
        rows.append(TailRow(float(t), emp, bound, slack, bool(emp <= bound + slack)))
    return rows


def strongly_convex_1d_targets(count: int, seed) -> list[dict]:
    """Random mu x^2/2 + kinks on an interval, as 1D GibbsTargets with exact means."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        mu = float(rng.uniform(0.5, 4.0))
        c = rng.uniform(-2.0, 2.0, size=int(rng.integers(1, 4)))
        w = rng.uniform(0.1, 2.0, size=c.size)
        s = float(rng.uniform(-1.0, 1.0))
        a, b = -6.0 / math.sqrt(mu) - 3.0, 6.0 / math.sqrt(mu) + 3.0

        def nld(X, mu=mu, c=c, w=w, s=s):
            x = np.asarray(X, dtype=float).reshape(-1)
            return 0.5 * mu * x * x + s * x + np.sum(w * np.abs(x[:, None] - c), axis=1)

        dom = interval(a, b)
        out.append(dict(target=GibbsTarget(nld, None, dom, mu, 0.0, 1, NormSpec.lp(2, 1), c), mu=mu))
    return out


# --- parameter and closed-form audits -------------------------------------------------


def fact_gaussian_audit(count: int, seed, tol: float = 1e-10) -> AuditReport:
    """gaussian_curve(admissible_shift(delta, eps), eps) <= delta + tol on random (delta, eps)."""
    rng = np.random.default_rng(seed)
    rep = AuditReport("gaussian-shift")
    for i in range(count):
        delta = float(np.exp(rng.uniform(np.log(1e-12), np.log(0.49))))
        eps = float(np.exp(rng.uniform(np.log(1e-3), np.log(20.0))))
        t = admissible_shift(delta, eps)
        lhs = gaussian_curve(t, eps)
        rep.rows.append(AuditRow(i, eps, lhs, delta, bool(lhs <= delta + tol)))
    return rep


def kmudef_audit(count: int, seed) -> AuditReport:
    """Recompute mu from k for random inputs; must agree to one ulp."""
    from .mechanism import erm_params, sco_params

    rng = np.random.default_rng(seed)
    rep = AuditReport("k-mu-coupling")
    for i in range(count):
        G = float(np.exp(rng.uniform(-3, 3)))
        Theta = float(np.exp(rng.uniform(-3, 5)))
        d = int(rng.integers(1, 1000))
        n = int(rng.integers(1, 10 ** 6))
        eps = float(np.exp(rng.uniform(np.log(0.01), np.log(10.0))))
        delta = float(np.exp(rng.uniform(np.log(1e-12), np.log(0.49))))
        c = int(rng.choice([1, 2]))
        for sel in (erm_params, sco_params):
            p = sel(G, Theta, d, n, eps, delta, c)
            mu = kmudef_mu(G, p.k, n, eps, delta, c)
            err = abs(mu - p.mu)
            rep.rows.append(AuditRow(i, eps, err, math.ulp(p.mu), bool(err <= math.ulp(p.mu))))
    return rep


# --- end-to-end mechanism privacy ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MechanismPrivacyInstance:
    model: LossModel
    neighbor: LossModel
    params: object
    reg: object
    domain: Box
    instance_id: int = 0


def random_mechanism_instances(count: int, seed, max_n: int = 5, c: int = 2) -> list[MechanismPrivacyInstance]:
    """d = 1 ERM instances with public bound G = 1 (|a| <= 1, |b| <= 1) and one swapped sample."""
    rng = np.random.default_rng(seed)
    spec = NormSpec.lp(2, 1)
    out = []
    for i in range(count):
        n = int(rng.integers(1, max_n + 1))
        family = str(rng.choice(["linear", "abs-linear", "hinge"]))
        R = float(rng.uniform(0.5, 3.0))
        dom = interval(-R, R)
        A = rng.uniform(-1.0, 1.0, size=(n, 1))
        b = rng.uniform(-1.0, 1.0, size=n) * (R if family == "abs-linear" else 1.0)
        if family == "hinge":
            b = np.sign(b) + (b == 0)
        model = LossModel(family, A, b, spec)
        j = int(rng.integers(n))
        nb = float(rng.uniform(-1.0, 1.0)) * (R if family == "abs-linear" else 1.0)
        if family == "hinge":
            nb = 1.0 if nb >= 0 else -1.0
        neighbor = neighboring_perturbation(model, j, Sample(rng.uniform(-1.0, 1.0, size=1), nb))
        eps = float(rng.uniform(0.25, 3.0))
        delta_target = float(np.exp(rng.uniform(np.log(1e-8), np.log(0.2))))
        d_mech, _ = split_delta(delta_target)
        x0 = [float(rng.uniform(-0.5 * R, 0.5 * R))]
        reg = regularizer_for_lp(2.0, dom, x0=x0)
        # The public Lipschitz bound must cover both neighbouring datasets.
        params = erm_params(1.0, reg.theta, 1, n, eps, d_mech, c)
        out.append(MechanismPrivacyInstance(model, neighbor, params, reg, dom, i))
    return out


def mechanism_privacy_audit(instances: Sequence[MechanismPrivacyInstance], tol: float = 1e-10,
                            quad_tol: float = 1e-10) -> AuditReport:
    """delta(nu || nu')(eps) and delta(nu' || nu)(eps) against the mechanism's delta."""
    rep = AuditReport("mechanism-privacy")
    for inst in instances:
        p = inst.params
        t1 = build_target(inst.model, inst.reg, p, inst.domain)
        t2 = build_target(inst.neighbor, inst.reg, p, inst.domain)
        bps = np.unique(np.concatenate([kinks_1d(inst.model), kinks_1d(inst.neighbor)]))
        lo, hi = float(inst.domain.lo[0]), float(inst.domain.hi[0])
        f1 = lambda t, tg=t1: tg.neg_log_density(np.asarray(t, dtype=float).reshape(-1, 1))
        f2 = lambda t, tg=t2: tg.neg_log_density(np.asarray(t, dtype=float).reshape(-1, 1))
        for label, P, Q in (("D||D'", f1, f2), ("D'||D", f2, f1)):
            lhs = PrivacyCurve1D(P, Q, (lo, hi), tol=quad_tol, breakpoints=bps).delta(p.epsilon)
            rep.rows.append(AuditRow(inst.instance_id, p.epsilon, lhs, p.delta, bool(lhs <= p.delta + tol), label))
    return rep


# --- serialisation ---------------------------------------------------------------------


def write_audit_csv(rows: Sequence[AuditRow], path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(AUDIT_CSV_HEADER)
            for r in rows:
                w.writerow([r.instance_id, f"{r.epsilon:.12g}", f"{r.lhs_delta:.12g}", f"{r.rhs_delta:.12g}",
                            f"{r.margin:.12g}", int(r.passed)])
    except OSError as exc:
        raise OSError(f"cannot write audit CSV {path}: {exc}") from exc
