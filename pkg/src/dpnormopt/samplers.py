"""Logconcave samplers on compact convex domains.

Targets are duck-typed: anything with ``neg_log_density(X)`` (rows of ``X`` are
points), ``domain`` and ``dim`` works; MALA additionally needs ``gradient(X)``.
Every point passed to ``neg_log_density`` counts as one value query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import quadrature
from .geometry import bounding_box, chord_intersect, members, random_direction

LOG_DENSITY_CUTOFF = 60.0


class SamplerError(RuntimeError):
    """A chain failed (budget, acceptance, non-finite values); the report is attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QueryCounter:
    """Wraps a vectorised function and counts the points it is evaluated at."""

    def __init__(self, func: Callable):
        self.func = func
        self.count = 0

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        self.count += 1 if X.ndim <= 1 and X.size == 1 else (X.shape[0] if X.ndim >= 1 else 1)
        return self.func(X)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class GibbsDensity1D:
    """The density proportional to exp(-phi) on [a, b], normalised by adaptive quadrature.

    ``phi`` must be convex (caller contract, not checked). Before exponentiating,
    phi is shifted by its minimum over a regular grid; grid cells whose endpoints
    both sit more than ``LOG_DENSITY_CUTOFF`` above that minimum carry negligible
    mass under convexity and are dropped from the support.
    """

    def __init__(self, phi: Callable, a: float, b: float, tol: float = 1e-10, breakpoints=None,
                 grid: int = 1024, max_intervals: int = 200_000):
        if not b > a:
            raise ValueError("need b > a")
        self.phi = phi
        self.a, self.b = float(a), float(b)
        self.evaluations = 0
        g = np.linspace(self.a, self.b, max(int(grid), 3))
        if breakpoints is not None:
            bp = np.asarray(breakpoints, dtype=float).ravel()
            g = np.unique(np.concatenate([g, bp[(bp > self.a) & (bp < self.b)]]))
        vals = self._phi(g)
        if not np.all(np.isfinite(vals)):
            raise ValueError("neg-log-density must be finite on the interval")
        istar = int(np.argmin(vals))
        self.shift = float(vals[istar])
        low = np.minimum(vals[:-1], vals[1:]) - self.shift <= LOG_DENSITY_CUTOFF
        low[max(istar - 1, 0):istar + 1] = True
        idx = np.nonzero(low)[0]
        first, last = int(idx[0]), int(idx[-1]) + 1
        self.support = (float(g[first]), float(g[last]))
        f = self._unnormalised
        try:
            part = quadrature.adaptive_partition(
                f, self.support[0], self.support[1], rel_tol=tol,
                breakpoints=g[first + 1:last], max_intervals=max_intervals)
        except quadrature.QuadratureError as exc:
            raise quadrature.QuadratureError(
                f"{exc} (support {self.support}, {self.evaluations} evaluations)", exc.partition) from exc
        self.partition = part
        self.Z = part.total
        if not self.Z > 0:
            raise quadrature.QuadratureError("density integrates to zero", part)
        self.cum = np.concatenate([[0.0], np.cumsum(part.values)])
        self.log_normalizer = math.log(self.Z) - self.shift

    def _phi(self, t):
        t = np.asarray(t, dtype=float)
        self.evaluations += t.size
        return np.asarray(self.phi(t), dtype=float)

    def _unnormalised(self, t):
        return np.exp(-(self._phi(t) - self.shift))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-(self._phi(x) - self.shift)) / self.Z
        return np.where((x >= self.a) & (x <= self.b), out, 0.0)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -(self._phi(x)) - self.log_normalizer

    def _partial(self, j, t):
        """Integral of the unnormalised density over [lo_j, t] by one K15 rule."""
        lo = self.partition.lo[j]
        vals, _ = quadrature.gk15(self._unnormalised, lo, t)
        return vals

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        lo_s, hi_s = self.support
        out[x >= hi_s] = 1.0
        inside = (x > lo_s) & (x < hi_s)
        if np.any(inside):
            xi = x[inside]
            j = np.clip(np.searchsorted(self.partition.hi, xi), 0, self.partition.lo.size - 1)
            out[inside] = (self.cum[j] + self._partial(j, xi)) / self.Z
        return np.clip(out, 0.0, 1.0)

    def ppf(self, u):
        """Inverse CDF by safeguarded Newton iterations inside the selected interval."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        mass = np.clip(u, 0.0, 1.0) * self.Z
        j = np.clip(np.searchsorted(self.cum, mass, side="right") - 1, 0, self.partition.lo.size - 1)
        target = mass - self.cum[j]
        lo = self.partition.lo[j].copy()
        hi = self.partition.hi[j].copy()
        width = hi - lo
        frac = np.clip(target / np.where(self.partition.values[j] > 0, self.partition.values[j], 1.0), 0, 1)
        t = lo + frac * width
        a, b = lo.copy(), hi.copy()
        active = np.ones(t.size, dtype=bool)
        for _ in range(60):
            if not np.any(active):
                break
            ia = np.nonzero(active)[0]
            ja = j[ia]
            g = self._partial(ja, t[ia]) - target[ia]
            dens = self._unnormalised(t[ia])
            below = g < 0
            a[ia] = np.where(below, t[ia], a[ia])
            b[ia] = np.where(below, b[ia], t[ia])
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = t[ia] - g / dens
            ok = np.isfinite(newton) & (newton > a[ia]) & (newton < b[ia])
            new_t = np.where(ok, newton, 0.5 * (a[ia] + b[ia]))
            step = np.abs(new_t - t[ia])
            t[ia] = new_t
            done = (step <= 1e-14 * np.maximum(width[ia], 1e-300)) | (b[ia] - a[ia] <= 1e-15 * np.maximum(1.0, np.abs(t[ia])))
            active[ia[done]] = False
        return t

    def sample(self, rng, n: int) -> np.ndarray:
        rng = _rng(rng)
        return self.ppf(rng.uniform(size=n))

    def expect(self, g: Callable, tol: float = 1e-10) -> float:
        """E[g(X)] by adaptive quadrature on the same support."""
        edges = np.concatenate([self.partition.lo, self.partition.hi[-1:]])

        def integrand(t):
            return np.asarray(g(t), dtype=float) * self._unnormalised(t)

        part = quadrature.adaptive_partition(integrand, self.support[0], self.support[1], rel_tol=tol,
                                             abs_tol=1e-2 * tol * self.Z, breakpoints=edges[1:-1])
        return part.total / self.Z


def sample_exact_1d(neg_log_density: Callable, interval, n: int, tol: float = 1e-10, seed=None,
                    breakpoints=None, grid: int = 1024) -> np.ndarray:
    """Draw ``n`` points from exp(-neg_log_density) on ``interval`` by inverting the quadrature CDF."""
    a, b = interval
    if not 0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    dens = GibbsDensity1D(neg_log_density, a, b, tol=tol, breakpoints=breakpoints, grid=grid)
    return dens.sample(_rng(seed), n)


def _piece_log_mass(width, h_l, h_r):
    delta = np.abs(h_r - h_l)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(delta > 1e-12, -np.expm1(-delta) / delta, 1.0)
    return np.log(width) - np.minimum(h_l, h_r) + np.log(factor)


def _sample_piece(rng, l, r, h_l, h_r) -> float:
    """Draw from exp(-h) on [l, r] with h linear from h_l to h_r."""
    u = rng.uniform()
    delta = h_r - h_l
    if abs(delta) < 1e-12:
        xi = u
    elif delta > 0:
        xi = -math.log1p(u * math.expm1(-delta)) / delta
    else:
        xi = 1.0 - math.log1p(u * math.expm1(delta)) / delta
    return l + (r - l) * min(max(xi, 0.0), 1.0)


def rejection_sample_1d(phi: Callable, a: float, b: float, rng, init=None, max_evals: int = 10_000):
    """One exact draw from exp(-phi) on [a, b] for convex ``phi``.

    Adaptive rejection sampling with the derivative-free secant envelope: on each
    cell, extensions of the neighbouring secants bound a convex phi from below,
    and the cell's own secant bounds it from above (squeeze). Returns the draw
    and the number of phi evaluations.
    """
    if init is None:
        xs = np.linspace(a, b, 5)
    else:
        xs = np.unique(np.clip(np.concatenate([[a, b], np.asarray(init, dtype=float).ravel()]), a, b))
        if xs.size < 3:
            xs = np.unique(np.concatenate([xs, [0.5 * (a + b)]]))
    hs = np.asarray(phi(xs), dtype=float)
    evals = xs.size
    while True:
        if not np.all(np.isfinite(hs)):
            raise SamplerError("non-finite neg-log-density along chord")
        ref = hs.min()
        h = hs - ref
        dx = np.diff(xs)
        sec = np.diff(h) / dx
        m = xs.size
        # pieces: (left, right, h_left, h_right)
        P_l, P_r, P_hl, P_hr = [], [], [], []
        for i in range(m - 1):
            xl, xr = xs[i], xs[i + 1]
            has_l = i >= 1
            has_r = i + 2 <= m - 1
            if has_l and has_r:
                sl, sr = sec[i - 1], sec[i + 1]
                hl_at = h[i]
                hr_at = h[i + 1]
                if sr - sl > 1e-300:
                    z = (hr_at - sr * xr - hl_at + sl * xl) / (sl - sr)
                    z = min(max(z, xl), xr)
                else:
                    z = xl
                hz = hl_at + sl * (z - xl)
                if z > xl:
                    P_l.append(xl); P_r.append(z); P_hl.append(hl_at); P_hr.append(hz)
                if xr > z:
                    P_l.append(z); P_r.append(xr); P_hl.append(hr_at + sr * (z - xr)); P_hr.append(hr_at)
            elif has_r:
                sr = sec[i + 1]
                P_l.append(xl); P_r.append(xr); P_hl.append(h[i + 1] + sr * (xl - xr)); P_hr.append(h[i + 1])
            elif has_l:
                sl = sec[i - 1]
                P_l.append(xl); P_r.append(xr); P_hl.append(h[i]); P_hr.append(h[i] + sl * (xr - xl))
            else:
                # Two abscissae only: no valid lower bound; refine first.
                mid = 0.5 * (xl + xr)
                xs = np.array([xl, mid, xr])
                hs = np.array([hs[0], float(phi(np.array([mid]))[0]), hs[-1]])
                evals += 1
                break
        else:
            P_l, P_r = np.array(P_l), np.array(P_r)
            P_hl, P_hr = np.array(P_hl), np.array(P_hr)
            logm = _piece_log_mass(P_r - P_l, P_hl, P_hr)
            w = np.exp(logm - logm.max())
            k = int(np.searchsorted(np.cumsum(w), rng.uniform() * w.sum()))
            k = min(k, w.size - 1)
            x = _sample_piece(rng, P_l[k], P_r[k], P_hl[k], P_hr[k])
            frac = (x - P_l[k]) / (P_r[k] - P_l[k]) if P_r[k] > P_l[k] else 0.0
            env = P_hl[k] + frac * (P_hr[k] - P_hl[k])
            i = min(int(np.searchsorted(xs, x, side="right")) - 1, m - 2)
            i = max(i, 0)
            squeeze = h[i] + sec[i] * (x - xs[i])
            log_v = math.log(rng.uniform())
            if log_v <= env - squeeze:
                return x, evals
            hx = float(np.asarray(phi(np.array([x])), dtype=float)[0])
            evals += 1
            if log_v <= env - (hx - ref):
                return x, evals
            if evals >= max_evals:
                raise SamplerError(f"rejection sampler exceeded {max_evals} evaluations")
            pos = int(np.searchsorted(xs, x))
            if pos < xs.size and xs[pos] == x:
                continue
            xs = np.insert(xs, pos, x)
            hs = np.insert(hs, pos, hx)


@dataclass
class SamplerConfig:
    """Chain settings; ``None`` for burn_in/thinning means 50*d and d."""

    method: str = "hit-and-run"
    burn_in: Optional[int] = None
    thinning: Optional[int] = None
    n_samples: int = 1
    step_size: Optional[float] = None
    quadrature_tol: float = 1e-10
    seed: int = 0
    max_queries: int = 50_000_000
    chord_sampler: str = "rejection"
    chord_grid: int = 64
    target_accept: float = 0.55
    geweke_threshold: float = 5.0

    def __post_init__(self):
        if self.method not in ("exact-1d", "hit-and-run", "mala"):
            raise ValueError(f"unknown sampler method {self.method!r}")
        if self.chord_sampler not in ("rejection", "quadrature"):
            raise ValueError(f"unknown chord sampler {self.chord_sampler!r}")
        for name in ("burn_in", "thinning"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 < self.quadrature_tol <= 1e-6:
            raise ValueError("quadrature_tol must lie in (0, 1e-6]")

    def resolved(self, d: int) -> tuple[int, int]:
        burn = self.burn_in if self.burn_in is not None else 50 * d
        thin = self.thinning if self.thinning is not None else d
        return burn, thin


@dataclass
class SamplerReport:
    value_queries: int = 0
    gradient_queries: int = 0
    acceptance_rate: float = float("nan")
    effective_sample_size_estimate: float = float("nan")
    converged: bool = True
    steps: int = 0
    diagnostics: dict = field(default_factory=dict)


def effective_sample_size(x) -> float:
    """Geyer initial-monotone-sequence ESS of a scalar trace."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = float(np.dot(xc, xc)) / n
    if var <= 0:
        return float(n)
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]
    npairs = n // 2
    gam = rho[0:2 * npairs:2] + rho[1:2 * npairs:2]
    pos = np.nonzero(gam <= 0)[0]
    if pos.size:
        gam = gam[:pos[0]]
    gam = np.minimum.accumulate(gam)
    tau = -1.0 + 2.0 * float(np.sum(gam))
    return float(n / max(tau, 1.0 / math.log10(max(n, 10))))


def geweke_z(x, first: float = 0.1, last: float = 0.5) -> float:
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    a = x[: max(int(first * n), 2)]
    b = x[n - max(int(last * n), 2):]
    va = a.var(ddof=1) / effective_sample_size(a) if a.var() > 0 else 0.0
    vb = b.var(ddof=1) / effective_sample_size(b) if b.var() > 0 else 0.0
    if va + vb == 0:
        return 0.0 if a.mean() == b.mean() else float("inf")
    return float((a.mean() - b.mean()) / math.sqrt(va + vb))


def _finish(samples, trace, report: SamplerReport, config: SamplerConfig):
    report.effective_sample_size_estimate = effective_sample_size(trace) if trace.size >= 4 else float(trace.size)
    if trace.size >= 20:
        z = geweke_z(trace)
        report.diagnostics["geweke_z"] = z
        if not abs(z) <= config.geweke_threshold:
            report.converged = False
            raise SamplerError(f"Geweke diagnostic |z|={abs(z):.2f} exceeds {config.geweke_threshold}", report)
    else:
        report.diagnostics["geweke_z"] = None
        report.diagnostics.setdefault("notes", []).append("trace too short for a stationarity check")
    return samples, report


def _strictly_interior(dom, y) -> bool:
    if hasattr(dom, "lo"):
        return bool(np.all(y > dom.lo) and np.all(y < dom.hi))
    return bool(dom.gauge(y[None, :])[0] < 0)


def sample_hit_and_run(target, config: SamplerConfig, x0=None):
    """Hit-and-run with exact conditional draws along each chord.

    Each step draws a uniform direction on the Euclidean sphere, intersects the
    line with the domain, and samples the target restricted to the chord (a 1D
    logconcave law) exactly, either by adaptive rejection (default) or by the
    quadrature inverse CDF.
    """
    rng = _rng(config.seed)
    d = target.dim
    dom = target.domain
    burn, thin = config.resolved(d)
    phi = QueryCounter(target.neg_log_density)
    x = np.array(dom.interior_point() if x0 is None else x0, dtype=float).reshape(-1)
    report = SamplerReport(diagnostics={"method": "hit-and-run", "chord_sampler": config.chord_sampler,
                                        "burn_in": burn, "thinning": thin})
    total = burn + config.n_samples * thin
    out = np.empty((config.n_samples, d))
    kept = 0
    for step in range(1, total + 1):
        u = random_direction(rng, d)
        tmin, tmax = chord_intersect(dom, x, u)

        def line(ts, x=x, u=u):
            ts = np.atleast_1d(ts)
            return phi(x + ts[:, None] * u)

        if config.chord_sampler == "rejection":
            t, _ = rejection_sample_1d(line, tmin, tmax, rng, init=[0.5 * tmin, 0.0, 0.5 * tmax])
        else:
            dens = GibbsDensity1D(line, tmin, tmax, tol=config.quadrature_tol, grid=config.chord_grid)
            t = float(dens.sample(rng, 1)[0])
        t = min(max(t, tmin), tmax)
        # A draw on the chord end is pulled inwards by a relative 1e-12 so the
        # next chord starts from a strictly interior point.
        y = x + t * u
        shrink = 1e-12
        while not _strictly_interior(dom, y) and t != 0.0:
            t *= 1.0 - shrink
            shrink = min(2.0 * shrink, 0.5)
            y = x + t * u
        x = y
        if phi.count > config.max_queries:
            report.value_queries = phi.count
            report.steps = step
            raise SamplerError(f"value-query budget {config.max_queries} exceeded", report)
        if step > burn and (step - burn) % thin == 0:
            out[kept] = x
            kept += 1
    trace = np.asarray(phi(out), dtype=float)
    report.value_queries = phi.count
    report.steps = total
    if not np.all(np.isfinite(trace)):
        raise SamplerError("non-finite neg-log-density at a retained sample", report)
    return _finish(out, trace, report, config)


def sample_mala(target, config: SamplerConfig, x0=None):
    """Metropolis-adjusted Langevin chain; proposals outside the domain are rejected.

    During burn-in the step size follows a Robbins-Monro recursion towards the
    target acceptance rate, then stays fixed.
    """
    rng = _rng(config.seed)
    d = target.dim
    dom = target.domain
    burn, thin = config.resolved(d)
    phi = QueryCounter(target.neg_log_density)
    grad_calls = 0

    def grad(x):
        nonlocal grad_calls
        grad_calls += 1
        return np.asarray(target.gradient(x[None, :]), dtype=float).reshape(-1)

    x = np.array(dom.interior_point() if x0 is None else x0, dtype=float).reshape(-1)
    lo, hi = bounding_box(dom)
    scale = float(np.linalg.norm(hi - lo)) ** 2 / (d * 100.0)
    sc = float(getattr(target, "strong_convexity", 0.0) or 0.0)
    h = config.step_size or (min(scale, 1.0 / (sc * d)) if sc > 0 else scale)
    fx = float(phi(x[None, :])[0])
    gx = grad(x)
    report = SamplerReport(diagnostics={"method": "mala", "burn_in": burn, "thinning": thin})
    total = burn + config.n_samples * thin
    out = np.empty((config.n_samples, d))
    trace = np.empty(config.n_samples)
    kept = 0
    acc_post = 0
    acc_burn_tail = 0
    burn_tail = max(burn // 2, 1)
    log_h = math.log(h)
    for step in range(1, total + 1):
        y = x - h * gx + math.sqrt(2.0 * h) * rng.standard_normal(d)
        accepted = False
        if members(dom, y[None, :])[0]:
            fy = float(phi(y[None, :])[0])
            gy = grad(y)
            fwd = y - x + h * gx
            bwd = x - y + h * gy
            log_alpha = -(fy - fx) - (np.dot(bwd, bwd) - np.dot(fwd, fwd)) / (4.0 * h)
            if math.log(rng.uniform()) < log_alpha:
                x, fx, gx = y, fy, gy
                accepted = True
        else:
            rng.uniform()  # keep the random stream aligned with in-domain proposals
        if step <= burn:
            log_h += (float(accepted) - config.target_accept) / (step ** 0.6)
            log_h = min(log_h, math.log(scale * 100.0))
            h = math.exp(log_h)
            if step > burn - burn_tail:
                acc_burn_tail += accepted
        else:
            acc_post += accepted
            if (step - burn) % thin == 0:
                out[kept] = x
                trace[kept] = fx
                kept += 1
        if phi.count > config.max_queries:
            report.value_queries = phi.count
            raise SamplerError(f"value-query budget {config.max_queries} exceeded", report)
    report.value_queries = phi.count
    report.gradient_queries = grad_calls
    report.steps = total
    report.acceptance_rate = acc_post / (total - burn)
    report.diagnostics["step_size"] = h
    report.diagnostics["burn_in_tail_acceptance"] = acc_burn_tail / burn_tail
    if report.acceptance_rate < 0.05:
        report.converged = False
        raise SamplerError(f"MALA acceptance rate {report.acceptance_rate:.3f} < 0.05 after adaptation", report)
    return _finish(out, trace, report, config)


def sample(target, config: SamplerConfig, x0=None):
    """Dispatch on ``config.method``."""
    if config.method == "mala":
        return sample_mala(target, config, x0)
    if config.method == "exact-1d":
        if target.dim != 1:
            raise ValueError("exact-1d sampling needs a one-dimensional target")
        lo, hi = bounding_box(target.domain)
        phi = QueryCounter(target.neg_log_density)
        dens = GibbsDensity1D(lambda t: phi(np.asarray(t).reshape(-1, 1)), float(lo[0]), float(hi[0]),
                              tol=config.quadrature_tol, breakpoints=getattr(target, "breakpoints", None))
        draws = dens.sample(_rng(config.seed), config.n_samples).reshape(-1, 1)
        report = SamplerReport(value_queries=phi.count, effective_sample_size_estimate=float(config.n_samples),
                               steps=0, diagnostics={"method": "exact-1d",
                                                     "quadrature_error": dens.partition.error / dens.Z})
        return draws, report
    return sample_hit_and_run(target, config, x0)


def tv_distance_estimate(samples, reference, bins: int = 100, range=None, kind: str = "cdf") -> float:
    """Histogram estimate of the total variation distance to a reference law.

    ``samples`` has shape (n,) or (n, 1) for d = 1 and (n, 2) for d = 2.
    ``reference`` is a CDF (d = 1, ``kind="cdf"``), a density (``kind="density"``)
    or another sample array. Bin masses are compared on a regular grid over
    ``range`` (default: the sample range).
    """
    if bins < 10:
        raise ValueError("bins must be >= 10")
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    d = X.shape[1]
    if d > 2:
        raise ValueError("histogram TV supports d <= 2")
    ref_samples = None
    if not callable(reference):
        ref_samples = np.asarray(reference, dtype=float)
        if ref_samples.ndim == 1:
            ref_samples = ref_samples[:, None]
    if range is None:
        pool = X if ref_samples is None else np.vstack([X, ref_samples])
        range = [(float(pool[:, j].min()), float(pool[:, j].max())) for j in np.arange(d)]
    elif d == 1 and np.ndim(range) == 1:
        range = [tuple(range)]
    edges = [np.linspace(r[0], r[1], bins + 1) for r in range]
    emp, _ = np.histogramdd(X, bins=edges)
    emp = emp / X.shape[0]
    if ref_samples is not None:
        ref, _ = np.histogramdd(ref_samples, bins=edges)
        ref = ref / ref_samples.shape[0]
    elif d == 1 and kind == "cdf":
        ref = np.diff(np.asarray(reference(edges[0]), dtype=float))
    else:
        # Density: 3-point Gauss-Legendre per bin and coordinate.
        gx, gw = np.polynomial.legendre.leggauss(3)
        if d == 1:
            e = edges[0]
            half = 0.5 * np.diff(e)
            pts = (0.5 * (e[:-1] + e[1:]))[:, None] + half[:, None] * gx
            ref = (np.asarray(reference(pts.ravel()), dtype=float).reshape(pts.shape) @ gw) * half
        else:
            ex, ey = edges
            hx, hy = 0.5 * np.diff(ex), 0.5 * np.diff(ey)
            px = (0.5 * (ex[:-1] + ex[1:]))[:, None] + hx[:, None] * gx
            py = (0.5 * (ey[:-1] + ey[1:]))[:, None] + hy[:, None] * gx
            PX = px[:, None, :, None] * np.ones((1, bins, 1, 3))
            PY = py[None, :, None, :] * np.ones((bins, 1, 3, 1))
            vals = np.asarray(reference(np.stack([PX.ravel(), PY.ravel()], axis=1)), dtype=float)
            vals = vals.reshape(bins, bins, 3, 3)
            ref = np.einsum("ijkl,k,l->ij", vals, gw, gw) * hx[:, None] * hy[None, :]
    return float(0.5 * np.sum(np.abs(emp - ref)))
