"""Command line entry point: ``dpnormopt {run,audit,params,sample}``.

Exit codes: 0 success, 1 audit failure, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiment import (AuditConfig, ConfigError, ExperimentConfig, emit_csv, run_audit_suite, run_experiment,
                         write_summary)

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
log = logging.getLogger("dpnormopt")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output path")
    common.add_argument("--threads", type=int, help="worker processes (default $DPNORMOPT_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="dpnormopt", description="Regularized exponential mechanism toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="run a privacy-utility experiment grid")

    a = sub.add_parser("audit", parents=[common], help="run the numerical audit suite")
    a.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("params", parents=[common], help="print k, mu and utility bounds")
    p.add_argument("--variant", default="erm", choices=["erm", "sco", "sc-erm", "sc-sco"])
    p.add_argument("--G", type=float, required=True)
    p.add_argument("--theta", type=float, help="regularizer range (erm, sco)")
    p.add_argument("--mu-loss", type=float, help="loss strong convexity (sc-erm, sc-sco)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--c", type=int, default=2, choices=[1, 2])

    s = sub.add_parser("sample", parents=[common], help="one mechanism release from a config and a dataset")
    s.add_argument("--data", type=Path, required=True, help="dataset CSV (a_1..a_d[,b])")
    s.add_argument("--epsilon", type=float, help="defaults to the first epsilon of the config")
    return ap


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or Path(f"{cfg.name}.csv")

    def progress(job, recs):
        ok = [r.empirical_gap for r in recs if not r.error]
        mean = float(np.mean(ok)) if ok else float("nan")
        log.info("d=%s n=%d eps=%g mean gap %.4g (bound %.4g), %d failed", job[0], job[1], job[2], mean,
                 recs[0].analytic_bound, len(recs) - len(ok))

    report = run_experiment(cfg, threads=args.threads, progress=progress)
    emit_csv(report, out)
    write_summary(report, out.with_suffix(".summary.json"))
    for key, slope in report.slopes().items():
        print(f"d={key[0]} eps={key[1]:g} log-gap/log-n slope {slope:.3f}")
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"wrote {out}")
    return EXIT_RUNTIME if report.failures else EXIT_OK


def _cmd_audit(args) -> int:
    cfg = AuditConfig.from_json(args.config) if args.config else AuditConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.inject_bug:
        cfg.inject_bug = True

    def progress(name, rep, secs):
        print(f"{name:22s} {'PASS' if rep.passed else 'FAIL'}  rows={len(rep.rows)} "
              f"worst margin={rep.worst_margin:.3e}  ({secs:.1f}s)")

    suite = run_audit_suite(cfg, progress=progress)
    for w in suite.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        from .audit import write_audit_csv

        write_audit_csv(suite.rows(), args.out)
    print("audit suite", "PASSED" if suite.passed else "FAILED")
    return EXIT_OK if suite.passed else EXIT_AUDIT


def _cmd_params(args) -> int:
    from .mechanism import params_for, utility_bound

    if args.variant in ("erm", "sco") and args.theta is None:
        raise ConfigError("--theta is required for erm and sco")
    if args.variant in ("sc-erm", "sc-sco") and args.mu_loss is None:
        raise ConfigError("--mu-loss is required for sc-erm and sc-sco")
    params = params_for(args.variant, args.G, args.n, args.epsilon, args.delta, args.c, args.d,
                        Theta=args.theta, mu_loss=args.mu_loss)
    out = dict(variant=args.variant, k=params.k, mu=params.mu, c=args.c,
               bound_stated_constants=utility_bound(params, c=1), bound_at_c=utility_bound(params))
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        args.out.write_text(text + "\n")
    return EXIT_OK


def _cmd_sample(args) -> int:
    from .losses import load_dataset_csv
    from .mechanism import params_for, solve_private, split_delta
    from .regularizers import regularizer_for_geometry

    cfg = ExperimentConfig.from_json(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    spec = cfg.norm_for(cfg.d_list[0])
    dom = cfg.domain_for(spec)
    try:
        model = load_dataset_csv(args.data, spec, cfg.loss["family"])
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    eps = args.epsilon or float(cfg.epsilons[0])
    d_mech, d_tv = split_delta(cfg.delta, cfg.tv_fraction)
    reg = None if cfg.variant in ("sc-erm", "sc-sco") else regularizer_for_geometry(spec, dom)
    params = params_for(cfg.variant, model.G, model.n, eps, d_mech, cfg.sensitivity_factor, spec.dim,
                        Theta=reg.theta if reg else None, mu_loss=cfg.mu_loss)
    x, rep = solve_private(model, reg, params, cfg.sampler_config(), seed=seed, domain=dom, delta_tv=d_tv)
    out = dict(x=[float(v) for v in x], epsilon=eps, delta=cfg.delta, k=params.k, mu=params.mu,
               value_queries=rep.sampler.value_queries, utility_bound=rep.utility_bound,
               certified_delta=rep.certified_delta, notes=rep.notes)
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        args.out.write_text(text + "\n")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "audit": _cmd_audit, "params": _cmd_params, "sample": _cmd_sample}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command in ("run", "sample") and args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if args.command == "params":
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # surface everything else as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
