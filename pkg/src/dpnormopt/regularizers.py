"""Strongly convex regularizers with bounded range for l_p and Schatten-p geometries.

Every preset has the form ``r(x) = coef * ||x - x0||_q^2`` for some inner exponent
``q`` (same kind of norm as the geometry), chosen so that ``r`` is 1-strongly
convex in the target norm. ``theta`` is the analytic range bound, not the exact
range over the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Ball, Box, Domain, NormSpec, norm_value


@dataclass(frozen=True, eq=False)
class Regularizer:
    """``coef * ||x - reference_point||_inner^2`` together with its range bound."""

    strong_convexity_norm: NormSpec
    inner_norm: NormSpec
    coef: float
    theta: float
    reference_point: np.ndarray
    sc_constant: float = 1.0

    def evaluate(self, X):
        X = np.asarray(X, dtype=float)
        nrm = norm_value(self.inner_norm, X - self.reference_point)
        return self.coef * np.square(nrm)

    def __call__(self, X):
        return self.evaluate(X)

    def gradient(self, X):
        """Gradient of ``coef * ||w||_q^2``; defined as 0 at the reference point."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        W = np.atleast_2d(X) - self.reference_point
        q = self.inner_norm.p
        if self.inner_norm.kind == "lp":
            nrm = np.atleast_1d(norm_value(self.inner_norm, W))
            if q == 2.0:
                G = 2.0 * self.coef * W
            else:
                safe = np.where(nrm > 0, nrm, 1.0)
                A = np.abs(W) / safe[:, None]
                G = 2.0 * self.coef * safe[:, None] * np.sign(W) * A ** (q - 1.0)
                G[nrm == 0] = 0.0
        else:
            shape = self.inner_norm.shape
            M = W.reshape(-1, *shape)
            U, s, Vt = np.linalg.svd(M, full_matrices=False)
            nrm = np.atleast_1d(norm_value(self.inner_norm, W))
            safe = np.where(nrm > 0, nrm, 1.0)
            scaled = (s / safe[:, None]) ** (q - 1.0)
            G = 2.0 * self.coef * safe[:, None, None] * (U * scaled[:, None, :]) @ Vt
            G = G.reshape(W.shape[0], -1)
            G[nrm == 0] = 0.0
        return G[0] if single else G


def _diameter(dom: Domain, spec: NormSpec, diameter: Optional[float]) -> float:
    if diameter is not None:
        if not diameter > 0:
            raise ValueError("diameter must be positive")
        return float(diameter)
    if isinstance(dom, Box):
        return float(norm_value(spec, dom.hi - dom.lo))
    if isinstance(dom, Ball) and dom.norm == spec:
        return dom.diameter()
    raise ValueError("cannot infer the diameter in this norm; pass diameter=")


def _check_x0(dom: Domain, x0, spec: NormSpec) -> np.ndarray:
    from .geometry import domain_membership

    x0 = np.asarray(x0 if x0 is not None else dom.interior_point(), dtype=float).reshape(-1)
    if x0.size != spec.dim:
        raise ValueError("reference point does not match the geometry dimension")
    if not domain_membership(dom, x0):
        raise ValueError("reference point must lie in the domain")
    return x0


def _log_dim_exponent(m: int) -> float:
    # q = 1 + 1/ln m; for m = 1 the construction is undefined and q = 2 is used.
    return 2.0 if m == 1 else 1.0 + 1.0 / math.log(m)


def regularizer_for_lp(p: float, dom: Domain, x0=None, diameter: Optional[float] = None) -> Regularizer:
    """Regularizer for l_p with p in [1, 2].

    For p in (1, 2] this is ``||x - x0||_p^2 / (2(p-1))`` with
    ``theta = D^2 / (2(p-1))``. For p = 1 it switches to the inner exponent
    ``q = 1 + 1/ln d`` with coefficient ``e^2 / (2(q-1))``.
    """
    p = float(p)
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"regularizer_for_lp needs p in [1, 2], got {p}; use regularizer_for_lp_high")
    spec = NormSpec.lp(p, dom.dim)
    D = _diameter(dom, spec, diameter)
    x0 = _check_x0(dom, x0, spec)
    if p > 1.0:
        coef = 1.0 / (2.0 * (p - 1.0))
        return Regularizer(spec, spec, coef, coef * D * D, x0)
    q = _log_dim_exponent(dom.dim)
    scale = 1.0 if dom.dim == 1 else math.e ** 2
    coef = scale / (2.0 * (q - 1.0))
    return Regularizer(spec, NormSpec.lp(q, dom.dim), coef, coef * D * D, x0)


def regularizer_for_lp_high(p: float, dom: Domain, x0=None, diameter: Optional[float] = None) -> Regularizer:
    """``0.5 ||x - x0||_2^2`` for p >= 2 with ``theta = 0.5 d^(1-2/p) D^2``."""
    p = float(p)
    if p < 2.0:
        raise ValueError(f"regularizer_for_lp_high needs p >= 2, got {p}")
    spec = NormSpec.lp(p, dom.dim)
    D = _diameter(dom, spec, diameter)
    x0 = _check_x0(dom, x0, spec)
    expo = 1.0 if np.isinf(p) else 1.0 - 2.0 / p
    theta = 0.5 * dom.dim ** expo * D * D
    return Regularizer(spec, NormSpec.lp(2, dom.dim), 0.5, theta, x0)


def regularizer_for_schatten(p: float, dom: Domain, x0=None, diameter: Optional[float] = None) -> Regularizer:
    """Schatten analogue of the l_p presets; range penalties use d2, the number of singular values."""
    p = float(p)
    if not dom.norm.is_matrix:
        raise ValueError("regularizer_for_schatten needs a matrix geometry")
    d1, d2 = dom.norm.shape
    spec = NormSpec.schatten(p, d1, d2)
    D = _diameter(dom, spec, diameter)
    x0 = _check_x0(dom, x0, spec)
    if 1.0 < p <= 2.0:
        coef = 1.0 / (2.0 * (p - 1.0))
        return Regularizer(spec, spec, coef, coef * D * D, x0)
    if p == 1.0:
        q = _log_dim_exponent(d2)
        scale = 1.0 if d2 == 1 else math.e ** 2
        coef = scale / (2.0 * (q - 1.0))
        return Regularizer(spec, NormSpec.schatten(q, d1, d2), coef, coef * D * D, x0)
    expo = 1.0 if np.isinf(p) else 1.0 - 2.0 / p
    theta = 0.5 * d2 ** expo * D * D
    return Regularizer(spec, NormSpec.schatten(2, d1, d2), 0.5, theta, x0)


def regularizer_for_geometry(spec: NormSpec, dom: Domain, x0=None, diameter: Optional[float] = None) -> Regularizer:
    """Pick the preset matching ``spec``."""
    if spec.is_matrix:
        return regularizer_for_schatten(spec.p, dom, x0, diameter)
    if spec.p <= 2.0:
        return regularizer_for_lp(spec.p, dom, x0, diameter)
    return regularizer_for_lp_high(spec.p, dom, x0, diameter)


def strong_convexity_gap(func, X, Y, ts, mu: float, norm: NormSpec) -> np.ndarray:
    """Slack of the strong convexity inequality for each pair and each t.

    Returns ``t f(x) + (1-t) f(y) - mu t(1-t)/2 ||x-y||^2 - f(tx + (1-t)y)``
    normalised by ``1 + |f(x)| + |f(y)|``; negative entries are violations.
    """
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    fx = np.asarray(func(X), dtype=float)
    fy = np.asarray(func(Y), dtype=float)
    dist2 = np.square(np.atleast_1d(norm_value(norm, X - Y)))
    out = []
    for t in ts:
        fm = np.asarray(func(t * X + (1 - t) * Y), dtype=float)
        slack = t * fx + (1 - t) * fy - 0.5 * mu * t * (1 - t) * dist2 - fm
        out.append(slack / (1.0 + np.abs(fx) + np.abs(fy)))
    return np.array(out)


def check_strong_convexity(reg: Regularizer, dom: Domain, rng: np.random.Generator, pairs: int = 1000,
                           ts=(0.25, 0.5, 0.75), tol: float = 1e-9) -> float:
    """Worst normalised slack over random pairs; passes when it is >= -tol."""
    X = dom.sample_points(rng, pairs)
    Y = dom.sample_points(rng, pairs)
    gap = strong_convexity_gap(reg.evaluate, X, Y, ts, reg.sc_constant, reg.strong_convexity_norm)
    return float(gap.min())


def check_range(reg: Regularizer, dom: Domain, rng: np.random.Generator, samples: int = 10_000) -> float:
    """Observed max r - min r over random domain points (should not exceed theta)."""
    X = dom.sample_points(rng, samples)
    X = np.vstack([X, reg.reference_point])
    vals = reg.evaluate(X)
    return float(vals.max() - vals.min())


def restriction_constants(norm: NormSpec, a, b, mu: float = 1.0, lipschitz: float = 1.0) -> tuple[float, float]:
    """Euclidean constants of a function restricted to the segment [a, b].

    A function ``lipschitz``-Lipschitz and ``mu``-strongly convex in ``norm`` is,
    on the segment, ``lipschitz * ||b-a|| / ||b-a||_2``-Lipschitz and
    ``mu * ||b-a||^2 / ||b-a||_2^2``-strongly convex in the Euclidean norm.
    """
    diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    ratio = float(norm_value(norm, diff)) / float(np.linalg.norm(diff))
    return lipschitz * ratio, mu * ratio * ratio


def check_segment_restriction(func, norm: NormSpec, a, b, mu: float = 1.0, points: int = 64,
                              ts=(0.25, 0.5, 0.75)) -> float:
    """Worst normalised slack of the 1D Euclidean strong convexity of ``func`` on [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _, mu_seg = restriction_constants(norm, a, b, mu=mu)
    length = float(np.linalg.norm(b - a))
    s = np.linspace(0.0, 1.0, points)
    si, sj = np.meshgrid(s, s, indexing="ij")
    si, sj = si.ravel(), sj.ravel()
    P = a + si[:, None] * (b - a)
    Q = a + sj[:, None] * (b - a)
    fp = np.asarray(func(P), dtype=float)
    fq = np.asarray(func(Q), dtype=float)
    dist2 = (length * (si - sj)) ** 2
    worst = np.inf
    for t in ts:
        m = a + (t * si + (1 - t) * sj)[:, None] * (b - a)
        slack = t * fp + (1 - t) * fq - 0.5 * mu_seg * t * (1 - t) * dist2 - np.asarray(func(m))
        worst = min(worst, float(np.min(slack / (1.0 + np.abs(fp) + np.abs(fq)))))
    return worst
