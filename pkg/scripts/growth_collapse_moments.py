"""Exact vs Monte Carlo moments of the growth-collapse process.

    python3 scripts/growth_collapse_moments.py --reps 100000 --n 4 --q 0.5
"""
import argparse

import numpy as np

from linsde.estimate import InitialLaw, Scenario, analytic_curves, compare_report, mc_moments
from linsde.model import growth_collapse
from linsde.moments import death_rates


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--q", type=float, default=0.5)
    ap.add_argument("--rate", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    grid = (0.5, 1.0, 2.0, 5.0, 10.0)
    scn = Scenario(growth_collapse(1.0, args.rate, args.q), InitialLaw(), 10.0, grid)
    curves = analytic_curves(scn, args.n)
    rep = mc_moments(scn, args.n, args.reps, args.seed, curves)
    table = compare_report(curves, rep)
    mu = death_rates(scn.pair.z, args.n)
    print("death rates:", " ".join(f"{m:.6g}" for m in mu))
    print(f"{'t':>5} {'n':>2} {'exact':>14} {'mc':>14} {'z':>7}")
    for t, n, a, m, se, z, ok in table.rows:
        print(f"{t:5g} {n:2d} {a:14.8g} {m:14.8g} {z:7.2f}")
    print("stationary:", " ".join(f"m{n}={curves[n].limit():.6g}" for n in sorted(curves)))
    print("table", "PASS" if table.passed else "FAIL", f"(share |z|>3: {table.frac_over_3:.3f})")


if __name__ == "__main__":
    np.set_printoptions(precision=6)
    main()
