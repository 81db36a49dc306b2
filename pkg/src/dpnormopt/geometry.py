"""Norms and compact convex domains.

Points are always handled as flat ``float64`` vectors of length ``NormSpec.dim``;
matrix geometries reshape to ``(d1, d2)`` internally when a norm is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

MEMBERSHIP_TOL = 1e-12
CHORD_TOL = 1e-12


@dataclass(frozen=True)
class NormSpec:
    """Ambient geometry: vector l_p on R^d or Schatten-p on d1 x d2 matrices."""

    kind: str
    p: float
    shape: tuple

    def __post_init__(self):
        if self.kind not in ("lp", "schatten"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        p = float(self.p)
        if not p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        object.__setattr__(self, "p", p)
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if self.kind == "lp":
            if len(shape) != 1 or shape[0] < 1:
                raise ValueError(f"l_p geometry needs shape (d,), got {shape}")
        else:
            if len(shape) != 2:
                raise ValueError(f"Schatten geometry needs shape (d1, d2), got {shape}")
            d1, d2 = shape
            if not d1 >= d2 >= 1:
                raise ValueError(f"Schatten geometry needs d1 >= d2 >= 1, got {shape}")

    @classmethod
    def lp(cls, p: float, d: int) -> "NormSpec":
        return cls("lp", p, (d,))

    @classmethod
    def schatten(cls, p: float, d1: int, d2: int) -> "NormSpec":
        return cls("schatten", p, (d1, d2))

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    @property
    def is_matrix(self) -> bool:
        return self.kind == "schatten"

    @property
    def spectral_dim(self) -> int:
        """Length of the vector the p-norm is taken of (d, or d2 singular values)."""
        return self.shape[0] if self.kind == "lp" else self.shape[1]

    def dual(self) -> "NormSpec":
        return NormSpec(self.kind, dual_exponent(self.p), self.shape)

    def with_p(self, p: float) -> "NormSpec":
        return NormSpec(self.kind, p, self.shape)


def dual_exponent(p: float) -> float:
    if p == 1.0:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lp_rows(V: np.ndarray, p: float) -> np.ndarray:
    """l_p norm of each row, max-factored so that large p cannot overflow."""
    A = np.abs(V)
    m = A.max(axis=-1)
    if np.isinf(p):
        return m
    if p == 1.0:
        return A.sum(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    s = np.sum((A / safe[..., None]) ** p, axis=-1)
    return np.where(m > 0, safe * s ** (1.0 / p), 0.0)


def _as_rows(spec: NormSpec, v) -> tuple[np.ndarray, bool]:
    a = np.asarray(v, dtype=float)
    if a.shape == spec.shape or (a.ndim == 1 and a.size == spec.dim):
        return a.reshape(1, spec.dim), True
    if a.ndim == 2 and a.shape[1] == spec.dim:
        return a, False
    if spec.is_matrix and a.ndim == 3 and a.shape[1:] == spec.shape:
        return a.reshape(a.shape[0], spec.dim), False
    raise ValueError(f"dimension mismatch: array of shape {a.shape} for geometry {spec.shape}")


def singular_values(spec: NormSpec, V: np.ndarray) -> np.ndarray:
    """Singular values of each flattened row of ``V`` viewed as a d1 x d2 matrix."""
    M = np.asarray(V, dtype=float).reshape(-1, *spec.shape)
    return np.linalg.svd(M, compute_uv=False)


def norm_value(spec: NormSpec, v) -> Union[float, np.ndarray]:
    """Norm of a point (scalar result) or of each row of a batch (array result).

    For Schatten geometries this is the l_p norm of the singular values, computed
    from a full SVD.
    """
    rows, single = _as_rows(spec, v)
    if spec.kind == "lp":
        out = _lp_rows(rows, spec.p)
    else:
        out = _lp_rows(singular_values(spec, rows), spec.p)
    return float(out[0]) if single else out


def dual_norm(spec: NormSpec, v):
    return norm_value(spec.dual(), v)


def norm_equivalence_factor(p: float, q: float, d: int) -> float:
    """Return d^(1/q - 1/p), the worst-case ratio ||v||_q / ||v||_p for q <= p."""
    p, q = float(p), float(q)
    if q < 1 or p < 1:
        raise ValueError("exponents must be >= 1")
    if q > p:
        raise ValueError(f"need q <= p, got q={q}, p={p}")
    if d < 1:
        raise ValueError("d must be positive")
    inv_p = 0.0 if np.isinf(p) else 1.0 / p
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    return float(d ** (inv_q - inv_p))


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed ball {x : ||x - center|| <= radius} in the geometry's own norm."""

    norm: NormSpec
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if c.size != self.norm.dim:
            raise ValueError("center does not match the geometry dimension")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.norm.dim

    def interior_point(self) -> np.ndarray:
        return self.center.copy()

    def diameter(self) -> float:
        return 2.0 * self.radius

    def gauge(self, X) -> np.ndarray:
        """||x - c|| - R for each row (negative inside)."""
        rows, _ = _as_rows(self.norm, X)
        return np.atleast_1d(norm_value(self.norm, rows - self.center)) - self.radius

    def sample_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Random points of the ball (not uniform for p != 2; used for property checks)."""
        z = rng.standard_normal((m, self.dim))
        nz = np.atleast_1d(norm_value(self.norm, z))
        scale = rng.uniform(size=m) ** (1.0 / self.dim)
        return self.center + self.radius * (z / nz[:, None]) * scale[:, None]


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box lo <= x <= hi, with a norm context for diameters and audits."""

    norm: NormSpec
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.size != self.norm.dim or hi.size != self.norm.dim:
            raise ValueError("box bounds do not match the geometry dimension")
        if not np.all(lo < hi):
            raise ValueError("box needs lo < hi coordinatewise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.norm.dim

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def interior_point(self) -> np.ndarray:
        return self.center.copy()

    def diameter(self) -> float:
        return float(norm_value(self.norm, self.hi - self.lo))

    def sample_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(m, self.dim))


Domain = Union[Ball, Box]


def interval(lo: float, hi: float) -> Box:
    """One-dimensional domain [lo, hi]."""
    return Box(NormSpec.lp(2, 1), [lo], [hi])


def domain_membership(dom: Domain, x) -> bool:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != dom.dim:
        raise ValueError("point does not match the domain dimension")
    if isinstance(dom, Box):
        return bool(np.all(x >= dom.lo) and np.all(x <= dom.hi))
    return bool(dom.gauge(x)[0] <= MEMBERSHIP_TOL)


def members(dom: Domain, X) -> np.ndarray:
    """Vectorised membership for the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(dom, Box):
        return np.all((X >= dom.lo) & (X <= dom.hi), axis=1)
    return dom.gauge(X) <= MEMBERSHIP_TOL


def bounding_box(dom: Domain) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dom, Box):
        return dom.lo.copy(), dom.hi.copy()
    # ||.||_inf <= ||.||_p for vectors and max |M_ij| <= sigma_max <= ||M||_p.
    r = dom.radius
    return dom.center - r, dom.center + r


def chord_intersect(dom: Domain, x, u) -> tuple[float, float]:
    """Maximal [tmin, tmax] with x + t u in the domain.

    ``x`` must be strictly interior and ``u`` a Euclidean unit vector. Ball chords
    are found by bisection on ||x + t u - c|| - R (closed form for the Euclidean
    and Frobenius cases); the returned endpoints are the inside ends of the final
    brackets, so both lie in the domain.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != dom.dim or u.size != dom.dim:
        raise ValueError("dimension mismatch in chord_intersect")
    if abs(float(np.dot(u, u)) - 1.0) > 2e-12:
        raise ValueError("direction must be a Euclidean unit vector")
    if isinstance(dom, Box):
        if not (np.all(x > dom.lo) and np.all(x < dom.hi)):
            raise ValueError("chord_intersect needs a strictly interior point")
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (dom.lo - x) / u
            t2 = (dom.hi - x) / u
        nz = u != 0
        tmin = float(np.max(np.minimum(t1, t2)[nz]))
        tmax = float(np.min(np.maximum(t1, t2)[nz]))
        return tmin, tmax

    w = x - dom.center
    R = dom.radius
    g0 = float(norm_value(dom.norm, w)) - R
    if not g0 < 0:
        raise ValueError("chord_intersect needs a strictly interior point")
    if dom.norm.p == 2.0:
        # Euclidean or Frobenius ball: roots of t^2 + 2 t <w,u> + |w|^2 - R^2.
        wu = float(np.dot(w, u))
        disc = wu * wu - float(np.dot(w, w)) + R * R
        s = np.sqrt(max(disc, 0.0))
        return -wu - s, -wu + s
    nu = float(norm_value(dom.norm, u))
    reach = (R + float(norm_value(dom.norm, w))) / nu
    signs = np.array([-1.0, 1.0])
    if not dom.norm.is_matrix:
        ends = _lp_chord_newton(w, u, R, dom.norm.p, reach)
        if ends is not None:
            return ends
    # Bisect both ends at once: row 0 walks along -u, row 1 along +u.
    lo = np.zeros(2)
    hi = np.full(2, reach)
    while np.max(hi - lo) > CHORD_TOL:
        mid = 0.5 * (lo + hi)
        pts = w + (signs * mid)[:, None] * u
        inside = norm_value(dom.norm, pts) <= R
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return -float(lo[0]), float(lo[1])


def _lp_chord_newton(w, u, R, p, reach):
    """Both chord ends of an l_p ball by Newton's method from outside.

    g(t) = ||w + t u||_p - R is convex, so Newton started beyond the root
    decreases monotonically onto it. The result is accepted only if
    ``root - CHORD_TOL`` is certified inside the ball; otherwise None (the
    caller falls back to bisection).
    """
    D = np.vstack([-u, u])
    t = np.full(2, reach)
    for _ in range(100):
        V = w + t[:, None] * D
        A = np.abs(V)
        if np.isinf(p):
            j = np.argmax(A, axis=1)
            nv = A[np.arange(2), j]
            slope = np.sign(V[np.arange(2), j]) * D[np.arange(2), j]
        elif p == 1.0:
            nv = A.sum(axis=1)
            slope = np.sum(np.sign(V) * D, axis=1)
        else:
            nv = _lp_rows(V, p)
            safe = np.where(nv > 0, nv, 1.0)
            slope = np.sum(np.sign(V) * (A / safe[:, None]) ** (p - 1.0) * D, axis=1)
        g = nv - R
        if np.any(slope <= 0) or not np.all(np.isfinite(g)):
            return None
        step = np.maximum(g, 0.0) / slope
        t = t - step
        if np.all(step <= 0.25 * CHORD_TOL):
            break
    else:
        return None
    inner = np.maximum(t - CHORD_TOL, 0.0)
    P = w + inner[:, None] * D
    if not np.all(_lp_rows(P, p) <= R):
        return None
    return -float(inner[0]), float(inner[1])


def random_direction(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal(d)
    return z / np.linalg.norm(z)


def project_ball(dom: Ball, y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto an l_p or Schatten-p ball."""
    w = np.asarray(y, dtype=float).reshape(-1) - dom.center
    if float(norm_value(dom.norm, w)) <= dom.radius:
        return dom.center + w
    if dom.norm.kind == "lp":
        return dom.center + _project_lp_vector(w, dom.norm.p, dom.radius)
    U, s, Vt = np.linalg.svd(w.reshape(dom.norm.shape), full_matrices=False)
    s_proj = _project_lp_vector(s, dom.norm.p, dom.radius)
    return dom.center + ((U * s_proj) @ Vt).ravel()


def _project_lp_vector(v: np.ndarray, p: float, R: float) -> np.ndarray:
    a = np.abs(v)
    sgn = np.sign(v)
    if np.isinf(p):
        return sgn * np.minimum(a, R)
    if p == 2.0:
        return v * (R / np.linalg.norm(v))
    if p == 1.0:
        # Sort-based simplex projection.
        srt = np.sort(a)[::-1]
        css = np.cumsum(srt)
        k = np.arange(1, a.size + 1)
        rho = np.nonzero(srt - (css - R) / k > 0)[0][-1]
        theta = (css[rho] - R) / (rho + 1.0)
        return sgn * np.maximum(a - theta, 0.0)

    # KKT: w_i + lam p w_i^(p-1) = a_i; bisect on lam so that sum w_i^p = R^p.
    def solve_w(lam):
        lo = np.zeros_like(a)
        hi = a.copy()
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            big = mid + lam * p * mid ** (p - 1.0) > a
            hi = np.where(big, mid, hi)
            lo = np.where(big, lo, mid)
        return 0.5 * (lo + hi)

    lam_lo, lam_hi = 0.0, 1.0
    while np.sum(solve_w(lam_hi) ** p) > R ** p:
        lam_hi *= 2.0
    for _ in range(100):
        lam = 0.5 * (lam_lo + lam_hi)
        if np.sum(solve_w(lam) ** p) > R ** p:
            lam_lo = lam
        else:
            lam_hi = lam
    w = solve_w(lam_hi)
    return sgn * w
