"""Print k, mu and the utility bounds of every variant on a small grid of (d, n, epsilon).

Usage: python scripts/parameter_table.py [--G 1] [--theta 0.5] [--mu-loss 1] [--delta 1e-6] [--c 2]
"""

from __future__ import annotations

import argparse
import sys

from dpnormopt.mechanism import params_for, utility_bound


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--G", type=float, default=1.0)
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--mu-loss", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=1e-6)
    ap.add_argument("--c", type=int, default=2, choices=[1, 2])
    args = ap.parse_args(argv)
    print(f"{'variant':8s} {'d':>4s} {'n':>6s} {'eps':>5s} {'k':>12s} {'mu':>12s} {'bound':>12s}")
    for variant in ("erm", "sco", "sc-erm", "sc-sco"):
        for d in (4, 16):
            for n in (500, 2000):
                for eps in (0.5, 2.0):
                    p = params_for(variant, args.G, n, eps, args.delta, args.c, d, Theta=args.theta,
                                   mu_loss=args.mu_loss)
                    print(f"{variant:8s} {d:4d} {n:6d} {eps:5.2g} {p.k:12.6g} {p.mu:12.6g} {utility_bound(p):12.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
