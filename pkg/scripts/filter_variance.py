"""Width of the switch-count filter g(p, mu) against 2 mu (1 - mu) / k."""
import argparse

import numpy as np

from filterprep.qma import filter_variance, g_filter_closed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mus", type=float, nargs="+", default=[0.2, 0.3, 0.5, 0.7])
    ap.add_argument("--ks", type=int, nargs="+", default=[11, 21, 51, 101, 201])
    args = ap.parse_args()

    print(f"{'mu':>5} {'k':>5} {'var(g^2) k/(mu(1-mu))':>23} {'var(g) k/(mu(1-mu))':>21} {'g(mu,mu)':>9}")
    ps = np.linspace(0, 1, 4001)
    for mu in args.mus:
        for k in args.ks:
            g = np.array([g_filter_closed(p, mu, k) for p in ps])
            w = g / g.sum()
            var_g = float(np.dot(w, (ps - np.dot(w, ps)) ** 2))
            scale = k / (mu * (1 - mu))
            print(f"{mu:5.2f} {k:5d} {filter_variance(mu, k) * scale:23.4f} {var_g * scale:21.4f} {g_filter_closed(mu, mu, k):9.6f}")


if __name__ == "__main__":
    main()
