"""Datasets, convex Lipschitz loss families, empirical and population risk."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .geometry import Ball, Domain, NormSpec, dual_exponent, norm_value

FAMILIES = ("linear", "abs-linear", "hinge")


@dataclass(frozen=True)
class Sample:
    a: np.ndarray
    b: float = 0.0


def _per_sample(family: str, Z: np.ndarray, b: np.ndarray) -> np.ndarray:
    if family == "linear":
        return Z
    if family == "abs-linear":
        return np.abs(Z - b)
    return np.maximum(0.0, 1.0 - b * Z)


def _per_sample_slope(family: str, Z: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Derivative of each per-sample loss with respect to <a, x> (a subgradient choice)."""
    if family == "linear":
        return np.ones_like(Z)
    if family == "abs-linear":
        return np.sign(Z - b)
    return np.where(1.0 - b * Z > 0, -b, 0.0) * np.ones_like(Z)


def lipschitz_constant(family: str, A: np.ndarray, b: np.ndarray, norm: NormSpec) -> float:
    """Exact Lipschitz bound of every per-sample loss in ``norm``: max dual norm of the features.

    For the hinge family the slope is scaled by |b|.
    """
    dn = np.atleast_1d(norm_value(norm.dual(), A))
    if family == "hinge":
        dn = dn * np.abs(b)
    return float(dn.max()) if dn.size else 0.0


@dataclass(frozen=True, eq=False)
class LossModel:
    """A dataset with one of the shipped loss families; ``G`` is computed, never supplied."""

    family: str
    A: np.ndarray
    b: np.ndarray
    norm: NormSpec
    G: float = field(init=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}; choose from {FAMILIES}")
        A = np.array(self.A, dtype=float, copy=True)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        if A.ndim == 3:
            A = A.reshape(A.shape[0], -1)
        if A.shape[0] == 0:
            raise ValueError("empty dataset")
        if A.shape[1] != self.norm.dim:
            raise ValueError(f"features have dimension {A.shape[1]}, geometry needs {self.norm.dim}")
        b = np.zeros(A.shape[0]) if self.b is None else np.array(self.b, dtype=float, copy=True).reshape(-1)
        if b.size != A.shape[0]:
            raise ValueError("labels and features disagree on the number of samples")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "G", lipschitz_constant(self.family, A, b, self.norm))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.norm.dim

    def sample_losses(self, X) -> np.ndarray:
        """Matrix of f(x_j; s_i), shape (m, n), for the rows x_j of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _per_sample(self.family, X @ self.A.T, self.b)

    def value(self, X):
        X = np.asarray(X, dtype=float)
        if self.family == "linear":
            # Linear risk is the loss of the averaged sample.
            out = np.atleast_2d(X) @ self.A.mean(axis=0)
        else:
            out = self.sample_losses(X).mean(axis=1)
        return float(out[0]) if X.ndim == 1 else out

    __call__ = value

    def subgradient(self, X):
        X = np.asarray(X, dtype=float)
        Z = np.atleast_2d(X) @ self.A.T
        G = _per_sample_slope(self.family, Z, self.b) @ self.A / self.n
        return G[0] if X.ndim == 1 else G

    def replace(self, index: int, replacement: Sample) -> "LossModel":
        return neighboring_perturbation(self, index, replacement)


def empirical_risk(model: LossModel, x) -> float:
    """F_D(x) = (1/n) sum_i f(x; s_i)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.dim:
        raise ValueError("point does not match the model dimension")
    return float(model.value(x))


def neighboring_perturbation(model: LossModel, index: int, replacement: Sample) -> LossModel:
    """The dataset with sample ``index`` swapped for ``replacement``."""
    if not 0 <= index < model.n:
        raise IndexError(f"sample index {index} out of range for n={model.n}")
    A = np.array(model.A)
    b = np.array(model.b)
    A[index] = np.asarray(replacement.a, dtype=float).reshape(-1)
    b[index] = replacement.b
    return LossModel(model.family, A, b, model.norm)


@dataclass(frozen=True, eq=False)
class PopulationSpec:
    """Seeded i.i.d. generator of (features, labels) with an optional known minimizer."""

    generator: Callable[[np.random.Generator, int], tuple]
    reference_minimizer: Optional[np.ndarray] = None
    name: str = "custom"

    def draw(self, rng: np.random.Generator, m: int) -> tuple[np.ndarray, np.ndarray]:
        A, b = self.generator(rng, m)
        return np.asarray(A, dtype=float), np.asarray(b, dtype=float)

    def dataset(self, family: str, norm: NormSpec, n: int, seed) -> LossModel:
        A, b = self.draw(np.random.default_rng(seed), n)
        return LossModel(family, A, b, norm)


def population_risk_estimate(spec: PopulationSpec, family: str, x, m: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of F_pop(x) from ``m`` fresh samples; returns (mean, stderr)."""
    if m < 2:
        raise ValueError("need m >= 2 for a standard error")
    A, b = spec.draw(np.random.default_rng(seed), m)
    x = np.asarray(x, dtype=float).reshape(-1)
    vals = _per_sample(family, A @ x, b)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(m))


def point_mass(a, b: float = 0.0) -> PopulationSpec:
    a = np.asarray(a, dtype=float).reshape(-1)

    def gen(rng, m):
        return np.tile(a, (m, 1)), np.full(m, float(b))

    return PopulationSpec(gen, name="point-mass")


def signed_basis(d: int, axis: int = 0) -> PopulationSpec:
    """a = +-e_axis with equal probability, b = 0."""

    def gen(rng, m):
        A = np.zeros((m, d))
        A[:, axis] = rng.choice([-1.0, 1.0], size=m)
        return A, np.zeros(m)

    return PopulationSpec(gen, reference_minimizer=np.zeros(d), name="signed-basis")


def dual_maximizer(norm: NormSpec, a) -> np.ndarray:
    """Unit vector v (in ``norm``) with <a, v> = ||a||_dual."""
    a = np.asarray(a, dtype=float).reshape(-1)
    q = dual_exponent(norm.p)
    if norm.kind == "lp":
        if np.isinf(q):
            v = np.zeros_like(a)
            i = int(np.argmax(np.abs(a)))
            v[i] = np.sign(a[i]) or 1.0
        elif q == 1.0:
            v = np.sign(a)
        else:
            v = np.sign(a) * np.abs(a) ** (q - 1.0)
    else:
        U, s, Vt = np.linalg.svd(a.reshape(norm.shape), full_matrices=False)
        if np.isinf(q):
            w = np.zeros_like(s)
            w[0] = 1.0
        elif q == 1.0:
            w = np.ones_like(s)
        else:
            w = s ** (q - 1.0)
        v = ((U * w) @ Vt).ravel()
    nv = float(norm_value(norm, v))
    return v / nv if nv > 0 else v


def planted_abs_linear(norm: NormSpec, x_star, spread: float = 0.5, seed_direction: int = 0) -> PopulationSpec:
    """Realizable abs-linear population with known minimizer ``x_star``.

    Features are ``normalize(g + spread * z)`` with a fixed random direction ``g``
    (drawn from ``seed_direction``) and isotropic Gaussian ``z``, scaled to dual
    norm 1; labels are ``<a, x_star>``. Then F_pop(x) = E|<a, x - x_star>| is
    minimised at ``x_star`` with value 0, and every sample is 1-Lipschitz.
    """
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    d = norm.dim
    g = np.random.default_rng(seed_direction).standard_normal(d)
    g /= np.linalg.norm(g)
    dual = norm.dual()

    def gen(rng, m):
        A = g + spread * rng.standard_normal((m, d))
        A /= np.atleast_1d(norm_value(dual, A))[:, None]
        return A, A @ x_star

    return PopulationSpec(gen, reference_minimizer=x_star, name="planted-abs-linear")


def spiked_features(norm: NormSpec, spread: float = 0.5, seed_direction: int = 0) -> PopulationSpec:
    """Features ``normalize(g + spread * z)`` (dual norm 1) with labels 0.

    Paired with the linear family this is private mean estimation: F_D is
    minimised on the boundary of the domain, opposite the mean feature.
    """
    d = norm.dim
    g = np.random.default_rng(seed_direction).standard_normal(d)
    g /= np.linalg.norm(g)
    dual = norm.dual()

    def gen(rng, m):
        A = g + spread * rng.standard_normal((m, d))
        A /= np.atleast_1d(norm_value(dual, A))[:, None]
        return A, np.zeros(m)

    return PopulationSpec(gen, name="spiked-features")


def lipschitz_ratio(func, dom: Domain, norm: NormSpec, rng: np.random.Generator, trials: int,
                    directions=None, step: float = 1e-3) -> float:
    """max |f(x) - f(y)| / ||x - y|| over random pairs in the domain.

    ``directions`` optionally adds pairs ``y = x + step * v`` along the given
    unit directions (the pairs that attain the bound for linear pieces).
    """
    X = dom.sample_points(rng, trials)
    Y = dom.sample_points(rng, trials)
    if directions is not None:
        V = np.atleast_2d(directions)
        idx = rng.integers(0, V.shape[0], size=trials)
        base = dom.sample_points(rng, trials)
        base = dom.center + 0.5 * (base - dom.center)
        X = np.vstack([X, base])
        Y = np.vstack([Y, base + step * V[idx]])
    dist = np.atleast_1d(norm_value(norm, X - Y))
    keep = dist > 0
    fx = np.asarray(func(X[keep]), dtype=float)
    fy = np.asarray(func(Y[keep]), dtype=float)
    return float(np.max(np.abs(fx - fy) / dist[keep]))


def lipschitz_audit(model: LossModel, trials: int, seed, dom: Optional[Domain] = None,
                    aligned: bool = True) -> float:
    """Worst observed |F(x) - F(y)| / ||x - y||; must not exceed G (1 + 1e-9)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    if dom is None:
        dom = Ball(model.norm, np.zeros(model.dim), 1.0)
    directions = None
    if aligned:
        directions = np.array([dual_maximizer(model.norm, a) for a in model.A])
    return lipschitz_ratio(model.value, dom, model.norm, rng, trials, directions)


def load_dataset_csv(path, norm: NormSpec, family: str) -> LossModel:
    """Read ``a_1,...,a_d[,b]`` rows (header required) into a LossModel."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, header required") from None
        rows = [r for r in reader if r]
    feat_cols = [i for i, h in enumerate(header) if h.startswith("a_")]
    expected = [f"a_{j}" for j in range(1, len(feat_cols) + 1)]
    if [header[i] for i in feat_cols] != expected:
        raise ValueError(f"{path}: header must start with a_1,...,a_d; got {header}")
    if len(feat_cols) != norm.dim:
        raise ValueError(f"{path}: {len(feat_cols)} feature columns, geometry needs {norm.dim}")
    extra = [h for h in header if not h.startswith("a_")]
    if extra not in ([], ["b"]):
        raise ValueError(f"{path}: unexpected columns {extra}")
    data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no samples")
    A = data[:, feat_cols]
    b = data[:, header.index("b")] if "b" in header else np.zeros(len(rows))
    return LossModel(family, A, b, norm)


def save_dataset_csv(model: LossModel, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"a_{j}" for j in range(1, model.dim + 1)] + ["b"])
        for a, b in zip(model.A, model.b):
            w.writerow([repr(float(v)) for v in a] + [repr(float(b))])
