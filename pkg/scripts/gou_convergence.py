"""Strong convergence of the grid scheme for Z with a Brownian part.

Mean |X_h(T) - X_ref(T)| against a fine-grid reference driven by the same
noise, for h = 2^-4 .. 2^-8.

    python3 scripts/gou_convergence.py --sigma 0.5 --jump-rate 1 --q 0.5
"""
import argparse

import numpy as np

from linsde import streams
from linsde.model import JumpComponent, JumpDistribution
from linsde.pathsim import GaussianZSpec, gou_noise, gou_reference, simulate_gou_discrete


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--r", type=float, default=1.0)
    ap.add_argument("--jump-rate", type=float, default=0.0)
    ap.add_argument("--q", type=float, default=0.5)
    ap.add_argument("--horizon", type=float, default=1.0)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--fine", type=int, default=14, help="reference step 2^-fine")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    comps = (JumpComponent(args.jump_rate, JumpDistribution.point(args.q)),) if args.jump_rate > 0 else ()
    gz = GaussianZSpec(args.a, args.sigma, comps)
    ks = list(range(4, 9))
    err = np.zeros(len(ks))
    chunk = 500
    done = 0
    for c in range(0, args.paths, chunk):
        p = min(chunk, args.paths - c)
        noise = gou_noise(gz, args.horizon, 2.0**-args.fine, p, streams.stream(args.seed, streams.GOU, c // chunk))
        _, ref = gou_reference(args.r, gz, 0.0, noise)
        for j, k in enumerate(ks):
            _, X = simulate_gou_discrete(args.r, gz, 0.0, 2.0**-k, args.horizon, noise=noise)
            err[j] += np.abs(X[:, -1] - ref[:, -1]).sum()
        done += p
    err /= done
    print(f"{'h':>10} {'mean |gap|':>12} {'ratio':>7}")
    for j, k in enumerate(ks):
        ratio = f"{err[j - 1] / err[j]:7.3f}" if j else ""
        print(f"{'2^-' + str(k):>10} {err[j]:12.4e} {ratio}")


if __name__ == "__main__":
    main()
