"""Run the desk-scale ERM utility suites and check the gap-versus-bound and slope criteria.

Usage: python scripts/run_utility_suites.py [--configs configs/lp15_erm.json ...] [--out results] [--threads N]
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from dpnormopt.experiment import ExperimentConfig, emit_csv, run_experiment, write_summary

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = [ROOT / "configs" / "lp15_erm.json", ROOT / "configs" / "l2_erm.json"]
SLOPE_MAX = -0.8


def check(report) -> tuple[bool, list[str]]:
    """Every cell mean within bound + 3 stderr and every (d, eps) slope <= SLOPE_MAX."""
    lines, ok = [], not report.failures
    for (d, n, eps), c in report.cells().items():
        cell_ok = c["mean"] <= c["bound"] + 3 * c["stderr"]
        ok &= cell_ok
        lines.append(f"  d={d} n={n} eps={eps:g} mean={c['mean']:.4g} se={c['stderr']:.2g} "
                     f"bound={c['bound']:.4g} ratio={c['mean'] / c['bound']:.3f} {'ok' if cell_ok else 'FAIL'}")
    for (d, eps), s in report.slopes().items():
        s_ok = math.isfinite(s) and s <= SLOPE_MAX
        ok &= s_ok
        lines.append(f"  slope d={d} eps={eps:g}: {s:.3f} {'ok' if s_ok else 'FAIL'}")
    return bool(ok), lines


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", nargs="+", type=Path, default=DEFAULT)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for path in args.configs:
        cfg = ExperimentConfig.from_json(path)
        report = run_experiment(cfg, threads=args.threads)
        emit_csv(report, args.out / f"{cfg.name}.csv")
        write_summary(report, args.out / f"{cfg.name}.summary.json")
        ok, lines = check(report)
        all_ok &= ok
        print(f"{cfg.name}: {'PASS' if ok else 'FAIL'}")
        print("\n".join(lines))
        sys.stdout.flush()
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
