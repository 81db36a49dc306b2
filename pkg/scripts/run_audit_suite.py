"""Run the numerical audit suite and write one CSV row per audited (instance, epsilon, ordering).

Usage: python scripts/run_audit_suite.py [--config configs/audit_default.json] [--out results/audit.csv]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from dpnormopt.audit import write_audit_csv
from dpnormopt.experiment import AuditConfig, run_audit_suite

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "audit_default.json")
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "audit.csv")
    args = ap.parse_args(argv)
    cfg = AuditConfig.from_json(args.config)

    def progress(name, rep, secs):
        print(f"{name:22s} {'PASS' if rep.passed else 'FAIL'}  rows={len(rep.rows):5d}  "
              f"worst margin={rep.worst_margin:.3e}  ({secs:.1f}s)", flush=True)

    suite = run_audit_suite(cfg, progress=progress)
    for w in suite.warnings:
        print(f"warning: {w}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_audit_csv(suite.rows(), args.out)
    print(f"audit suite {'PASSED' if suite.passed else 'FAILED'}; wrote {args.out}")
    return 0 if suite.passed else 1


if __name__ == "__main__":
    sys.exit(main())
