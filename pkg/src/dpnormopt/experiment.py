"""Experiment configuration, grid runner, CSV output and the audit suite driver."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import audit
from .geometry import Ball, Box, NormSpec
from .losses import (FAMILIES, LossModel, PopulationSpec, load_dataset_csv, planted_abs_linear,
                     population_risk_estimate, signed_basis, spiked_features)
from .mechanism import (VARIANTS, corollary_bound, nonprivate_minimum, params_for, sc_erm_utility_bound,
                        sc_sco_utility_bound, solve_private, split_delta)
from .regularizers import regularizer_for_geometry
from .samplers import SamplerConfig, SamplerError

log = logging.getLogger(__name__)

CSV_HEADER = ("d", "n", "epsilon", "delta", "rep", "variant", "p", "empirical_gap", "analytic_bound",
              "value_queries", "runtime_ms", "seed")
GENERATORS = ("spiked-features", "planted-abs-linear", "signed-basis", "constant")


class ConfigError(ValueError):
    """Invalid experiment or audit configuration."""


def derive_seed(master: int, *key) -> int:
    """Stable 63-bit seed from the master seed and a cell key."""
    h = hashlib.blake2b(repr((int(master),) + tuple(key)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


# --- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One privacy-utility grid; see configs/*.json for the JSON layout."""

    geometry: dict
    domain: dict
    loss: dict
    variant: str = "erm"
    epsilons: list = field(default_factory=lambda: [1.0])
    delta: float = 1e-6
    n_list: list = field(default_factory=lambda: [500])
    d_list: list = field(default_factory=lambda: [4])
    repetitions: int = 20
    sampler: dict = field(default_factory=dict)
    sensitivity_factor: int = 2
    seed: int = 0
    tv_fraction: float = 0.5
    mu_loss: Optional[float] = None
    population_samples: int = 20000
    record_runtime: bool = True
    name: str = "experiment"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        for name in ("epsilons", "n_list", "d_list"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not 0.0 < self.delta < 0.5:
            raise ConfigError("delta must lie in (0, 1/2)")
        if any(not e > 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")
        if any(int(n) < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be positive")
        if self.sensitivity_factor not in (1, 2):
            raise ConfigError("sensitivity_factor must be 1 or 2")
        if self.variant in ("sc-erm", "sc-sco") and not (self.mu_loss and self.mu_loss > 0):
            raise ConfigError("strongly convex variants need mu_loss > 0")
        kind = self.geometry.get("kind", "lp")
        if kind not in ("lp", "schatten"):
            raise ConfigError("geometry.kind must be 'lp' or 'schatten'")
        p = float(self.geometry.get("p", 2.0))
        if p < 1:
            raise ConfigError("geometry.p must be >= 1")
        if self.domain.get("type", "ball") not in ("ball", "box"):
            raise ConfigError("domain.type must be 'ball' or 'box'")
        if self.loss.get("family") not in FAMILIES:
            raise ConfigError(f"loss.family must be one of {FAMILIES}")
        data = self.loss.get("data", {"generator": "spiked-features"})
        if "csv" not in data and data.get("generator") not in GENERATORS:
            raise ConfigError(f"loss.data needs 'csv' or a generator from {GENERATORS}")
        try:
            self.sampler_config()
        except ValueError as exc:
            raise ConfigError(f"sampler: {exc}") from exc

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for req in ("geometry", "domain", "loss"):
            if req not in raw:
                raise ConfigError(f"missing config key {req!r}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(**self.sampler)

    def norm_for(self, d) -> NormSpec:
        p = float(self.geometry.get("p", 2.0))
        if self.geometry.get("kind", "lp") == "schatten":
            d1, d2 = d
            return NormSpec.schatten(p, int(d1), int(d2))
        return NormSpec.lp(p, int(d))

    def domain_for(self, spec: NormSpec):
        dim = spec.dim
        if self.domain.get("type", "ball") == "box":
            lo = np.full(dim, float(self.domain.get("lo", -1.0)))
            hi = np.full(dim, float(self.domain.get("hi", 1.0)))
            return Box(spec, lo, hi)
        return Ball(spec, np.zeros(dim), float(self.domain.get("radius", 1.0)))

    def population_for(self, spec: NormSpec) -> Optional[PopulationSpec]:
        data = self.loss.get("data", {"generator": "spiked-features"})
        gen = data.get("generator")
        if gen is None:
            return None
        if gen == "spiked-features":
            return spiked_features(spec, float(data.get("spread", 0.5)), int(data.get("seed_direction", 0)))
        if gen == "planted-abs-linear":
            x_star = np.zeros(spec.dim)
            x_star[0] = float(data.get("x_star_offset", 0.3))
            return planted_abs_linear(spec, x_star, float(data.get("spread", 0.5)), int(data.get("seed_direction", 0)))
        if gen == "signed-basis":
            return signed_basis(spec.dim)
        return PopulationSpec(lambda rng, m, d=spec.dim: (np.zeros((m, d)), np.zeros(m)),
                              reference_minimizer=None, name="constant")


# --- report --------------------------------------------------------------------


@dataclass
class CellRecord:
    d: object
    n: int
    epsilon: float
    delta: float
    rep: int
    variant: str
    p: float
    empirical_gap: float
    analytic_bound: float
    value_queries: int
    runtime_ms: float
    seed: int
    population_gap: float = float("nan")
    error: Optional[str] = None

    def key(self):
        d = tuple(self.d) if isinstance(self.d, (list, tuple)) else (self.d,)
        return d, self.n, self.epsilon, self.rep


@dataclass
class ExperimentReport:
    records: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def sorted_records(self) -> list:
        return sorted(self.records, key=CellRecord.key)

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.error]

    def cells(self) -> dict:
        """(d, n, epsilon) -> dict(mean, stderr, bound, reps) of the empirical gaps."""
        groups = {}
        for r in self.records:
            if r.error:
                continue
            d = tuple(r.d) if isinstance(r.d, (list, tuple)) else r.d
            groups.setdefault((d, r.n, r.epsilon), []).append(r)
        out = {}
        for key, rs in sorted(groups.items(), key=lambda kv: repr(kv[0])):
            g = np.array([r.empirical_gap for r in rs])
            se = float(g.std(ddof=1) / math.sqrt(g.size)) if g.size > 1 else float("nan")
            out[key] = dict(mean=float(g.mean()), stderr=se, bound=rs[0].analytic_bound, reps=g.size)
        return out

    def slopes(self) -> dict:
        """(d, epsilon) -> least-squares slope of log(mean gap) on log n."""
        by = {}
        for (d, n, eps), c in self.cells().items():
            by.setdefault((d, eps), []).append((n, c["mean"]))
        out = {}
        for key, pts in by.items():
            pts.sort()
            if len(pts) < 2 or any(m <= 0 for _, m in pts):
                out[key] = float("nan")
                continue
            x = np.log([p[0] for p in pts])
            y = np.log([p[1] for p in pts])
            out[key] = float(np.polyfit(x, y, 1)[0])
        return out


# --- running ---------------------------------------------------------------------


def _cell_bound(cfg: ExperimentConfig, spec, dom, G, n, eps) -> float:
    if G == 0:
        return 0.0
    if cfg.variant in ("erm", "sco"):
        return corollary_bound(spec, G, dom.diameter(), n, eps, cfg.delta, kind=cfg.variant)
    if cfg.variant == "sc-erm":
        return sc_erm_utility_bound(G, cfg.mu_loss, spec.dim, n, eps, cfg.delta)
    return sc_sco_utility_bound(G, cfg.mu_loss, spec.dim, n, eps, cfg.delta)


def _dataset(cfg: ExperimentConfig, spec: NormSpec, d, n: int) -> tuple[LossModel, Optional[PopulationSpec]]:
    data = cfg.loss.get("data", {"generator": "spiked-features"})
    family = cfg.loss["family"]
    if "csv" in data:
        full = load_dataset_csv(data["csv"], spec, family)
        if n > full.n:
            raise ConfigError(f"n={n} exceeds the {full.n} rows of {data['csv']}")
        return LossModel(family, full.A[:n], full.b[:n], spec), None
    pop = cfg.population_for(spec)
    seed = derive_seed(cfg.seed, "data", repr(d), n)
    return pop.dataset(family, spec, n, seed), pop


def run_cell(cfg_dict: dict, d, n: int, eps: float) -> list:
    """All repetitions of one grid cell; failures are recorded, not raised."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    spec = cfg.norm_for(d)
    dom = cfg.domain_for(spec)
    p = spec.p
    out = []
    d_out = list(d) if isinstance(d, (list, tuple)) else int(d)
    try:
        model, pop = _dataset(cfg, spec, d, n)
        reg = regularizer_for_geometry(spec, dom) if not cfg.variant in ("sc-erm", "sc-sco") else None
        d_mech, d_tv = split_delta(cfg.delta, cfg.tv_fraction)
        G = model.G
        bound = _cell_bound(cfg, spec, dom, G, n, eps)
        if G == 0:
            params = None
        else:
            params = params_for(cfg.variant, G, n, eps, d_mech, cfg.sensitivity_factor, spec.dim,
                                Theta=reg.theta if reg is not None else None, mu_loss=cfg.mu_loss)
        fmin, _ = nonprivate_minimum(model, dom)
    except Exception as exc:  # the whole cell is unusable
        return [CellRecord(d_out, n, eps, cfg.delta, r, cfg.variant, p, float("nan"), float("nan"), 0, 0.0,
                           derive_seed(cfg.seed, repr(d), n, eps, r), error=f"{type(exc).__name__}: {exc}")
                for r in range(cfg.repetitions)]
    scfg = cfg.sampler_config()
    for r in range(cfg.repetitions):
        seed = derive_seed(cfg.seed, repr(d), n, eps, r)
        t0 = time.perf_counter()
        rec = CellRecord(d_out, n, eps, cfg.delta, r, cfg.variant, p, float("nan"), bound, 0, 0.0, seed)
        try:
            if params is None:
                # Zero-Lipschitz data: every point is optimal, release the centre.
                x = dom.interior_point()
            else:
                x, rep = solve_private(model, reg, params, scfg, seed=seed, domain=dom, delta_tv=d_tv)
                rec.value_queries = rep.sampler.value_queries
            rec.empirical_gap = float(model.value(x) - fmin)
            if cfg.variant.endswith("sco") and pop is not None and pop.reference_minimizer is not None:
                fx, _ = population_risk_estimate(pop, model.family, x, cfg.population_samples, seed)
                fs, _ = population_risk_estimate(pop, model.family, pop.reference_minimizer,
                                                 cfg.population_samples, seed)
                rec.population_gap = fx - fs
        except (SamplerError, ValueError, ArithmeticError) as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        # Wall-clock time is the only nondeterministic column; it can be switched off.
        rec.runtime_ms = 1e3 * (time.perf_counter() - t0) if cfg.record_runtime else 0.0
        out.append(rec)
    return out


def _threads(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("DPNORMOPT_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None, progress=None) -> ExperimentReport:
    """Run every (d, n, epsilon) cell; cells are independent jobs for the worker pool."""
    threads = _threads(threads)
    raw = cfg.to_dict()
    jobs = [(d, int(n), float(e)) for d in cfg.d_list for n in cfg.n_list for e in cfg.epsilons]
    report = ExperimentReport()
    if threads == 1:
        for job in jobs:
            recs = run_cell(raw, *job)
            report.records.extend(recs)
            if progress:
                progress(job, recs)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = [(job, pool.submit(run_cell, raw, *job)) for job in jobs]
            for job, fut in futs:
                recs = fut.result()
                report.records.extend(recs)
                if progress:
                    progress(job, recs)
    for r in report.failures:
        report.notes.append(f"cell d={r.d} n={r.n} eps={r.epsilon} rep={r.rep} failed: {r.error}")
    return report


# --- CSV -------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return "x".join(str(int(x)) for x in v)
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def emit_csv(report: ExperimentReport, path) -> None:
    """Per-repetition table with the fixed header, rows ordered by (d, n, epsilon, rep)."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in report.sorted_records():
                w.writerow([_fmt(getattr(r, col)) for col in CSV_HEADER])
    except OSError as exc:
        raise OSError(f"cannot write results CSV {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    """Parse an emitted CSV back into typed dicts."""
    ints = {"n", "rep", "value_queries", "seed"}
    strs = {"variant"}
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rec = {}
            for k, v in row.items():
                if k in ints:
                    rec[k] = int(v)
                elif k in strs:
                    rec[k] = v
                elif k == "d":
                    rec[k] = tuple(int(x) for x in v.split("x")) if "x" in v else int(v)
                else:
                    rec[k] = float(v)
            out.append(rec)
    return out


def write_summary(report: ExperimentReport, path) -> None:
    """JSON with per-cell means, standard errors, bounds and per-(d, eps) slopes."""
    cells = [dict(d=k[0], n=k[1], epsilon=k[2], **v) for k, v in report.cells().items()]
    slopes = [dict(d=k[0], epsilon=k[1], slope=v) for k, v in report.slopes().items()]
    Path(path).write_text(json.dumps(dict(cells=cells, slopes=slopes, notes=report.notes), indent=2, default=list))


# --- audit suite -----------------------------------------------------------------


@dataclass
class AuditConfig:
    """Counts and seeds of the audit suite; zero counts skip a section with a warning."""

    gdp_instances: int = 500
    gdp_epsilons: list = field(default_factory=lambda: [0.25 * i for i in range(13)])
    gdp_tol: float = 1e-8
    tight_pairs: list = field(default_factory=lambda: [[1.0, 1.0], [2.0, 0.5], [0.5, 2.0]])
    tight_tol: float = 1e-6
    fact_count: int = 100
    kmudef_count: int = 1000
    risk_targets: int = 50
    concentration_targets: int = 2
    concentration_samples: int = 20000
    mechanism_instances: int = 50
    seed: int = 0
    inject_bug: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "AuditConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown audit config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        for f in ("gdp_instances", "fact_count", "kmudef_count", "risk_targets", "concentration_targets",
                  "mechanism_instances"):
            if getattr(cfg, f) < 0:
                raise ConfigError(f"{f} must be >= 0")
        return cfg

    @classmethod
    def from_json(cls, path) -> "AuditConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read audit config {path}: {exc}") from exc
        return cls.from_dict(raw.get("audit", raw))


@dataclass
class SuiteReport:
    sections: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.sections.values())

    def rows(self) -> list:
        out = []
        for name, rep in self.sections.items():
            for r in rep.rows:
                r2 = dataclasses.replace(r, instance_id=f"{name}:{r.instance_id}:{r.ordering}")
                out.append(r2)
        return out


def run_audit_suite(cfg: AuditConfig, progress=None) -> SuiteReport:
    """Run every audit section; the suite passes iff every row passes."""
    suite = SuiteReport()
    s = cfg.seed

    def section(name, count, fn):
        if count == 0:
            suite.warnings.append(f"{name}: count is 0, vacuous pass")
            suite.sections[name] = audit.AuditReport(name)
            return
        t0 = time.perf_counter()
        rep = fn()
        suite.sections[name] = rep
        if progress:
            progress(name, rep, time.perf_counter() - t0)

    def gdp():
        rep = audit.AuditReport("gaussian-domination")
        for inst in audit.generate_audit_instances(cfg.gdp_instances, derive_seed(s, "gdp")):
            rep.extend(audit.audit_theorem_gdp(inst, cfg.gdp_epsilons, cfg.gdp_tol, flip=cfg.inject_bug))
        return rep

    def tight():
        rep = audit.AuditReport("tight-gaussian")
        for i, (mu, G) in enumerate(cfg.tight_pairs):
            inst = audit.tight_instance(mu, G, instance_id=i)
            rep.extend(audit.audit_theorem_gdp(inst, cfg.gdp_epsilons, cfg.tight_tol, flip=cfg.inject_bug))
        for r in rep.rows:
            r.passed = r.passed and abs(r.margin) <= cfg.tight_tol
        return rep

    def risk():
        rep = audit.AuditReport("gibbs-risk")
        for i, t in enumerate(audit.random_risk_targets(cfg.risk_targets, derive_seed(s, "risk"))):
            chk = audit.gibbs_risk_check(t["F"], t["domain"], t["k"], t["dim"], breakpoints=t["breakpoints"])
            rep.rows.append(audit.AuditRow(i, t["k"], chk.gap, chk.bound, chk.passed))
        # Closed-form Laplace case: F = |x| on [-1, 1] with k = 10.
        chk = audit.gibbs_risk_check(np.abs, (-1.0, 1.0), 10.0, 1, breakpoints=np.array([0.0]))
        exact = audit.laplace_gap(10.0)
        rep.rows.append(audit.AuditRow("laplace", 10.0, chk.gap, chk.bound,
                                       chk.passed and abs(chk.gap - exact) <= 1e-6))
        return rep

    def conc():
        rep = audit.AuditReport("concentration")
        targets = [dict(target=_gaussian_target(), mu=1.0)]
        targets += audit.strongly_convex_1d_targets(cfg.concentration_targets, derive_seed(s, "conc"))
        for i, t in enumerate(targets):
            tg = t["target"]
            mu = t["mu"]
            lo, hi = float(tg.domain.lo[0]), float(tg.domain.hi[0])
            from .samplers import GibbsDensity1D

            dens = GibbsDensity1D(lambda x: tg.neg_log_density(np.asarray(x).reshape(-1, 1)), lo, hi,
                                  breakpoints=tg.breakpoints)
            mean = dens.expect(lambda x: x)
            rows = audit.concentration_check(tg, lambda X: np.asarray(X)[:, 0], 1.0,
                                             [0.5 / math.sqrt(mu), 1.0 / math.sqrt(mu), 2.0 / math.sqrt(mu)],
                                             cfg.concentration_samples, derive_seed(s, "conc", i), mean=mean)
            for row in rows:
                rep.rows.append(audit.AuditRow(i, row.t, row.empirical, row.bound + row.slack, row.passed))
        return rep

    section("gaussian-domination", cfg.gdp_instances, gdp)
    section("tight-gaussian", len(cfg.tight_pairs), tight)
    section("gaussian-shift", cfg.fact_count, lambda: audit.fact_gaussian_audit(cfg.fact_count, derive_seed(s, "fact")))
    section("k-mu-coupling", cfg.kmudef_count, lambda: audit.kmudef_audit(cfg.kmudef_count, derive_seed(s, "kmu")))
    section("gibbs-risk", cfg.risk_targets, risk)
    section("concentration", cfg.concentration_targets + 1, conc)
    section("mechanism-privacy", cfg.mechanism_instances,
            lambda: audit.mechanism_privacy_audit(
                audit.random_mechanism_instances(cfg.mechanism_instances, derive_seed(s, "mech"))))
    return suite


def _gaussian_target():
    from .geometry import interval
    from .mechanism import GibbsTarget

    return GibbsTarget(lambda X: 0.5 * np.asarray(X, dtype=float).reshape(-1) ** 2, None, interval(-12.0, 12.0),
                       1.0, 0.0, 1, NormSpec.lp(2, 1))
