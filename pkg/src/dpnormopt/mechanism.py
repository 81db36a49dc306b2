"""Regularized exponential mechanism: parameter selection, utility bounds, solver.

The mechanism releases one draw from the density proportional to
``exp(-k (F_D(x) + mu r(x)))`` on the domain. ``c`` (the sensitivity factor)
multiplies ``G / n`` wherever the Lipschitz constant of ``F_D - F_D'`` enters;
``c = 2`` is the worst case for a one-sample swap, ``c = 1`` reproduces the
textbook constants.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Ball, Box, Domain, NormSpec, bounding_box, dual_exponent, members, norm_value, project_ball
from .losses import LossModel, dual_maximizer
from .regularizers import Regularizer
from .samplers import SamplerConfig, SamplerError, SamplerReport, sample

VARIANTS = ("erm", "sco", "sc-erm", "sc-sco")


def log_term(delta: float) -> float:
    """log(1/(2 delta)) for delta in (0, 1/2)."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    return math.log(1.0 / (2.0 * delta))


def _check_positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v}")


def _check_c(c):
    if c not in (1, 2):
        raise ValueError(f"sensitivity factor must be 1 or 2, got {c}")


@dataclass(frozen=True)
class MechanismParams:
    """Inverse temperature ``k`` and regularization weight ``mu`` with their inputs."""

    k: float
    mu: float
    epsilon: float
    delta: float
    variant: str
    sensitivity_factor: int = 2
    G: float = float("nan")
    n: int = 0
    d: int = 0
    theta: float = float("nan")
    mu_loss: float = float("nan")

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        _check_c(self.sensitivity_factor)
        log_term(self.delta)
        _check_positive(k=self.k, epsilon=self.epsilon)
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")

    @property
    def curvature(self) -> float:
        """Strong convexity of F_D + mu r per unit k (mu, or mu_loss for sc variants)."""
        return self.mu_loss if self.variant in ("sc-erm", "sc-sco") else self.mu

    @property
    def gdp_shift(self) -> float:
        """Shift t of the dominating Gaussian pair: c G sqrt(k) / (n sqrt(curvature))."""
        c = self.sensitivity_factor
        return c * self.G * math.sqrt(self.k) / (self.n * math.sqrt(self.curvature))


def kmudef_mu(G: float, k: float, n: int, epsilon: float, delta: float, c: int = 2) -> float:
    """The regularization weight tied to ``k``: 2 (cG)^2 k log(1/(2 delta)) / (n eps)^2."""
    cg = c * G
    return 2.0 * cg * cg * k * log_term(delta) / ((n * epsilon) ** 2)


def erm_params(G: float, Theta: float, d: int, n: int, epsilon: float, delta: float, c: int = 2) -> MechanismParams:
    """k = sqrt(d) n eps / (cG sqrt(2 Theta L)); mu follows from k so the coupling is exact."""
    _check_positive(G=G, Theta=Theta, d=d, n=n, epsilon=epsilon)
    _check_c(c)
    L = log_term(delta)
    k = math.sqrt(d) * n * epsilon / (c * G * math.sqrt(2.0 * Theta * L))
    mu = kmudef_mu(G, k, n, epsilon, delta, c)
    return MechanismParams(k, mu, epsilon, delta, "erm", c, G, n, d, Theta)


def erm_utility_bound(G: float, Theta: float, d: int, n: int, epsilon: float, delta: float, c: int = 1) -> float:
    """E F_D(x) - min F_D <= cG sqrt(Theta) sqrt(8 d L) / (n eps) (c = 1: the stated bound)."""
    _check_positive(G=G, Theta=Theta, d=d, n=n, epsilon=epsilon)
    return c * G * math.sqrt(Theta) * math.sqrt(8.0 * d * log_term(delta)) / (n * epsilon)


def sco_constants(G: float, Theta: float, n: int, epsilon: float, delta: float, c: int = 2) -> tuple[float, float]:
    """(C1, C2) of the population-risk tradeoff C1 k + (C2 + d) / k."""
    L = log_term(delta)
    cg = c * G
    C1 = 2.0 * cg * cg * Theta * L / ((n * epsilon) ** 2)
    C2 = n * epsilon ** 2 / (2.0 * L)
    return C1, C2


def sco_params(G: float, Theta: float, d: int, n: int, epsilon: float, delta: float, c: int = 2) -> MechanismParams:
    """k = sqrt((d + C2) / C1) minimises C1 k + (C2 + d) / k."""
    _check_positive(G=G, Theta=Theta, d=d, n=n, epsilon=epsilon)
    _check_c(c)
    C1, C2 = sco_constants(G, Theta, n, epsilon, delta, c)
    k = math.sqrt((d + C2) / C1)
    mu = kmudef_mu(G, k, n, epsilon, delta, c)
    return MechanismParams(k, mu, epsilon, delta, "sco", c, G, n, d, Theta)


def sco_utility_bound(G: float, Theta: float, d: int, n: int, epsilon: float, delta: float, c: int = 1) -> float:
    """cG sqrt(Theta) (sqrt(8 d L)/(n eps) + sqrt(8/n)); the non-private part does not scale with c."""
    _check_positive(G=G, Theta=Theta, d=d, n=n, epsilon=epsilon)
    L = log_term(delta)
    return G * math.sqrt(Theta) * (c * math.sqrt(8.0 * d * L) / (n * epsilon) + math.sqrt(8.0 / n))


def sc_erm_params(G: float, mu_loss: float, n: int, epsilon: float, delta: float, c: int = 2,
                  d: int = 0, variant: str = "sc-erm") -> MechanismParams:
    """k = n^2 eps^2 mu_loss / (2 (cG)^2 L) with no added regularizer."""
    _check_positive(G=G, mu_loss=mu_loss, n=n, epsilon=epsilon)
    _check_c(c)
    cg = c * G
    k = (n * epsilon) ** 2 * mu_loss / (2.0 * cg * cg * log_term(delta))
    return MechanismParams(k, 0.0, epsilon, delta, variant, c, G, n, d, float("nan"), mu_loss)


def sc_sco_params(G: float, mu_loss: float, n: int, epsilon: float, delta: float, c: int = 2, d: int = 0) -> MechanismParams:
    """Same temperature as sc-erm."""
    return sc_erm_params(G, mu_loss, n, epsilon, delta, c, d, variant="sc-sco")


def sc_erm_utility_bound(G: float, mu_loss: float, d: int, n: int, epsilon: float, delta: float, c: int = 1) -> float:
    """d / k = 2 d (cG)^2 L / (n^2 eps^2 mu_loss)."""
    _check_positive(G=G, mu_loss=mu_loss, d=d, n=n, epsilon=epsilon)
    return 2.0 * d * (c * G) ** 2 * log_term(delta) / ((n * epsilon) ** 2 * mu_loss)


def sc_sco_utility_bound(G: float, mu_loss: float, d: int, n: int, epsilon: float, delta: float, c: int = 1) -> float:
    """(G^2 / (n mu_loss)) (1 + 2 d c^2 L / (n eps^2))."""
    _check_positive(G=G, mu_loss=mu_loss, d=d, n=n, epsilon=epsilon)
    return G * G / (n * mu_loss) * (1.0 + 2.0 * d * c * c * log_term(delta) / (n * epsilon ** 2))


def params_for(variant: str, G: float, n: int, epsilon: float, delta: float, c: int = 2, d: int = 1,
               Theta: Optional[float] = None, mu_loss: Optional[float] = None) -> MechanismParams:
    if variant == "erm":
        return erm_params(G, Theta, d, n, epsilon, delta, c)
    if variant == "sco":
        return sco_params(G, Theta, d, n, epsilon, delta, c)
    if variant == "sc-erm":
        return sc_erm_params(G, mu_loss, n, epsilon, delta, c, d)
    if variant == "sc-sco":
        return sc_sco_params(G, mu_loss, n, epsilon, delta, c, d)
    raise ValueError(f"unknown variant {variant!r}")


def utility_bound(params: MechanismParams, c: Optional[int] = None) -> float:
    """Theorem-level bound for ``params`` (defaults to the params' own sensitivity factor)."""
    c = params.sensitivity_factor if c is None else c
    p = params
    if p.variant == "erm":
        return erm_utility_bound(p.G, p.theta, p.d, p.n, p.epsilon, p.delta, c)
    if p.variant == "sco":
        return sco_utility_bound(p.G, p.theta, p.d, p.n, p.epsilon, p.delta, c)
    if p.variant == "sc-erm":
        return sc_erm_utility_bound(p.G, p.mu_loss, p.d, p.n, p.epsilon, p.delta, c)
    return sc_sco_utility_bound(p.G, p.mu_loss, p.d, p.n, p.epsilon, p.delta, c)


def corollary_bound(spec: NormSpec, G: float, D: float, n: int, epsilon: float, delta: float,
                    kind: str = "erm") -> float:
    """Closed-form l_p / Schatten-p bounds in terms of the diameter ``D``.

    For l_1 with d = 1 (and Schatten-1 with d2 = 1) the log-dimension construction
    degenerates and the l_2 form is returned.
    """
    _check_positive(G=G, D=D, n=n, epsilon=epsilon)
    if kind not in ("erm", "sco"):
        raise ValueError("kind must be 'erm' or 'sco'")
    L = log_term(delta)
    p = spec.p
    if spec.is_matrix:
        m = spec.dim
        r = spec.spectral_dim
    else:
        m = r = spec.dim
    ne = n * epsilon
    if 1.0 < p <= 2.0 or (p == 1.0 and r == 1):
        pp = p - 1.0 if p > 1.0 else 1.0
        priv = 2 * G * D * math.sqrt(m * L) / (ne * math.sqrt(pp))
        stat = 2 * G * D * math.sqrt(1.0 / (n * pp))
    elif p == 1.0:
        lg = math.sqrt(math.log(r))
        priv = 6 * G * D * lg * math.sqrt(m * L) / ne
        stat = 6 * G * D * lg / math.sqrt(n)
    else:
        inv = 0.0 if math.isinf(p) else 1.0 / p
        if spec.is_matrix:
            priv = 2 * G * D * r ** (0.5 - inv) * math.sqrt(m * L) / ne
        else:
            priv = 2 * G * D * m ** (1.0 - inv) * math.sqrt(L) / ne
        stat = 2 * G * D * r ** (0.5 - inv) / math.sqrt(n)
    return priv if kind == "erm" else priv + stat


def split_delta(delta_target: float, tv_fraction: float = 0.5) -> tuple[float, float]:
    """(delta_mech, delta_tv) with delta_tv = tv_fraction * delta_target."""
    if not 0.0 < delta_target < 1.0:
        raise ValueError("delta_target must lie in (0, 1)")
    if not 0.0 < tv_fraction < 1.0:
        raise ValueError("tv_fraction must lie in (0, 1)")
    d_tv = tv_fraction * delta_target
    return delta_target - d_tv, d_tv


@dataclass(frozen=True, eq=False)
class GibbsTarget:
    """exp(-neg_log_density) on ``domain``; immutable and shareable across chains."""

    neg_log_density: Callable
    gradient: Callable
    domain: Domain
    strong_convexity: float
    lipschitz_of_difference_bound: float
    dim: int
    norm: Optional[NormSpec] = None
    breakpoints: Optional[np.ndarray] = None


def kinks_1d(model: LossModel) -> np.ndarray:
    """Points where a one-dimensional F_D is not differentiable."""
    if model.dim != 1 or model.family == "linear":
        return np.empty(0)
    a = model.A[:, 0]
    nz = a != 0
    if model.family == "abs-linear":
        return np.unique(model.b[nz] / a[nz])
    ok = nz & (model.b != 0)
    return np.unique(1.0 / (model.b[ok] * a[ok]))


def build_target(model: LossModel, reg: Optional[Regularizer], params: MechanismParams,
                 domain: Optional[Domain] = None) -> GibbsTarget:
    """The Gibbs target k (F_D + mu r), or k F_D for the strongly convex variants."""
    if domain is None:
        raise ValueError("a domain is required")
    if domain.dim != model.dim:
        raise ValueError("domain and loss model disagree on the dimension")
    sc = params.variant in ("sc-erm", "sc-sco")
    if not sc:
        if reg is None:
            raise ValueError("the regularized variants need a regularizer")
        if reg.strong_convexity_norm.dim != model.dim or reg.strong_convexity_norm.kind != model.norm.kind:
            raise ValueError("regularizer geometry does not match the loss model")
    k, mu = params.k, params.mu
    use_reg = (not sc) and mu > 0

    def nld(X):
        X = np.asarray(X, dtype=float)
        X2 = X.reshape(-1, model.dim)
        out = k * model.sample_losses(X2).mean(axis=1)
        if use_reg:
            out = out + (k * mu) * np.atleast_1d(reg.evaluate(X2))
        return out

    def grad(X):
        X2 = np.asarray(X, dtype=float).reshape(-1, model.dim)
        g = k * np.atleast_2d(model.subgradient(X2))
        if use_reg:
            g = g + (k * mu) * np.atleast_2d(reg.gradient(X2))
        return g

    curv = params.mu_loss if sc else mu
    lip = params.sensitivity_factor * k * model.G / model.n
    bps = kinks_1d(model) if model.dim == 1 else None
    return GibbsTarget(nld, grad, domain, k * curv, lip, model.dim, model.norm, bps)


@dataclass
class MechanismReport:
    params: MechanismParams
    sampler: SamplerReport
    utility_bound: float
    delta_mech: float
    delta_tv: float
    certified_delta: float
    runtime_s: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def privacy(self) -> tuple[float, float]:
        """(epsilon, delta_mech + delta_tv) as accounted for this release."""
        return self.params.epsilon, self.delta_mech + self.delta_tv


def certified_delta(params: MechanismParams) -> float:
    """delta at ``params.epsilon`` certified by Gaussian domination with shift ``gdp_shift``."""
    from .audit import gaussian_curve

    return float(gaussian_curve(params.gdp_shift, params.epsilon))


def solve_private(model: LossModel, reg: Optional[Regularizer], params: MechanismParams,
                  sampler_config: SamplerConfig, seed: Optional[int] = None, domain: Optional[Domain] = None,
                  delta_tv: Optional[float] = None):
    """Release one draw of the mechanism; returns ``(x, MechanismReport)``.

    ``params.delta`` is the mechanism's own budget; ``delta_tv`` (default: equal
    to it, the even split) is the sampling error charged on top.
    Sampler failures propagate as :class:`SamplerError` with the report attached.
    """
    t0 = time.perf_counter()
    target = build_target(model, reg, params, domain)
    cfg = sampler_config if seed is None else dataclasses.replace(sampler_config, seed=seed)
    cfg = dataclasses.replace(cfg, n_samples=1)
    if cfg.method == "exact-1d" and target.dim != 1:
        raise ValueError("exact-1d sampling needs d = 1")
    draws, srep = sample(target, cfg)
    x = draws[0]
    if not members(target.domain, x[None, :])[0]:
        raise SamplerError("sampler returned a point outside the domain", srep)
    report = MechanismReport(params=params, sampler=srep, utility_bound=utility_bound(params),
                             delta_mech=params.delta, delta_tv=params.delta if delta_tv is None else delta_tv,
                             certified_delta=certified_delta(params), runtime_s=time.perf_counter() - t0)
    if cfg.method != "exact-1d":
        report.notes.append("sampling error is not measured per release; delta_tv is a budget, not a certificate")
    if report.certified_delta > params.delta:
        report.notes.append(f"Gaussian-domination delta {report.certified_delta:.3e} exceeds the mechanism budget")
    return x, report


# --- non-private reference optimum ------------------------------------------------


def _cvx_solve(model: LossModel, dom: Domain):
    import cvxpy as cp

    d = model.dim
    x = cp.Variable(d)
    z = model.A @ x
    if model.family == "linear":
        obj = cp.sum(z) / model.n
    elif model.family == "abs-linear":
        obj = cp.sum(cp.abs(z - model.b)) / model.n
    else:
        obj = cp.sum(cp.pos(1 - cp.multiply(model.b, z))) / model.n
    if isinstance(dom, Box):
        cons = [x >= dom.lo, x <= dom.hi]
    else:
        spec = dom.norm
        w = x - dom.center
        if spec.is_matrix:
            W = cp.reshape(w, spec.shape, order="C")
            if spec.p == 1:
                nrm = cp.normNuc(W)
            elif spec.p == 2:
                nrm = cp.norm(w, 2)
            elif math.isinf(spec.p):
                nrm = cp.sigma_max(W)
            else:
                return None
        else:
            nrm = cp.norm(w, "inf" if math.isinf(spec.p) else spec.p)
        cons = [nrm <= dom.radius]
    prob = cp.Problem(cp.Minimize(obj), cons)
    for solver in ("CLARABEL", "ECOS", "SCS"):
        try:
            prob.solve(solver=solver)
        except Exception:  # solver missing or failed; try the next one
            continue
        if x.value is not None and prob.status in ("optimal", "optimal_inaccurate"):
            return np.asarray(x.value, dtype=float)
    return None


def _project(dom: Domain, y):
    if isinstance(dom, Box):
        return np.clip(y, dom.lo, dom.hi)
    return project_ball(dom, y)


def projected_subgradient(model: LossModel, dom: Domain, iters: int = 20_000, x0=None) -> np.ndarray:
    """Projected subgradient descent with step D / (G sqrt(t)); returns the best iterate."""
    lo, hi = bounding_box(dom)
    D = float(np.linalg.norm(hi - lo))
    x = _project(dom, np.array(dom.interior_point() if x0 is None else x0, dtype=float))
    best, fbest = x, model.value(x)
    for t in range(1, iters + 1):
        g = model.subgradient(x)
        gn = float(np.linalg.norm(g))
        if gn == 0:
            break
        x = _project(dom, x - D / (gn * math.sqrt(t)) * g)
        fx = model.value(x)
        if fx < fbest:
            best, fbest = x, fx
    return best


def nonprivate_minimum(model: LossModel, dom: Domain, psgd_iters: int = 2000) -> tuple[float, np.ndarray]:
    """min over the domain of F_D (diagnostics only).

    Linear losses on a ball and on a box have closed forms; otherwise a conic
    solver is used, with projected subgradient descent as the fallback.
    """
    if model.family == "linear":
        abar = model.A.mean(axis=0)
        if isinstance(dom, Ball):
            x = dom.center - dom.radius * dual_maximizer(dom.norm, abar) if np.any(abar) else dom.center.copy()
            return float(model.value(x)), x
        if isinstance(dom, Box):
            x = np.where(abar > 0, dom.lo, dom.hi)
            return float(model.value(x)), x
    cands = []
    xs = _cvx_solve(model, dom)
    if xs is not None:
        cands.append(_project(dom, xs))
    else:
        cands.append(projected_subgradient(model, dom, psgd_iters))
    vals = [model.value(c) for c in cands]
    i = int(np.argmin(vals))
    return float(vals[i]), cands[i]
