"""Tail of g(p, mu) beyond 4 eps relative to a Gaussian of the same width, over a (mu, eps) grid."""
import argparse

import numpy as np

from filterprep.qma import TAIL_SLACK, k_for_bandwidth, tail_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.08, 0.1, 0.15])
    ap.add_argument("--mu-min", type=float, default=0.2)
    ap.add_argument("--mu-max", type=float, default=0.8)
    ap.add_argument("--steps", type=int, default=13)
    args = ap.parse_args()

    mus = np.linspace(args.mu_min, args.mu_max, args.steps)
    print("ratio = max_{|p-mu| >= 4 eps} g / (e^-4 g(mu, mu));  '*' marks ratio >", TAIL_SLACK)
    print("  mu " + "".join(f"{'eps=' + str(e):>15}" for e in args.eps))
    for mu in mus:
        cells = []
        for e in args.eps:
            r = tail_ratio(mu, e)
            cells.append(f"{r:7.3f}{'*' if r > TAIL_SLACK else ' '} k={k_for_bandwidth(mu, e):<4}")
        print(f"{mu:5.2f} " + "".join(cells))


if __name__ == "__main__":
    main()
