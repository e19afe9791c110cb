"""Scan the filter centre upwards and compare the first hit with the exact ground energy."""
import argparse
import json

from filterprep import build_model, normalize_spectrum, spectral_decompose, sweep_mu


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", default="transverse-ising")
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--params", default='{"J": 1.0, "g": 0.7}', help="model parameters as JSON")
    ap.add_argument("--model-seed", type=int, default=None)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    H = build_model(args.kind, args.n, json.loads(args.params), args.model_seed)
    Hn, smap = normalize_spectrum(H)
    ground = spectral_decompose(Hn).eigenvalues[0]
    res = sweep_mu(H, args.eps, args.seed)
    print(f"{'mu':>8} {'q':>10} {'aborted':>8} {'<H>':>9}")
    for mu, rep in res.trace:
        e = "" if rep.normalized_energy is None else f"{rep.normalized_energy:.4f}"
        print(f"{mu:8.4f} {rep.overlap:10.3e} {str(rep.aborted):>8} {e:>9}")
    hit = res.first_success
    print(f"exact ground (normalized) {ground:.4f}, first success at mu = {None if hit is None else round(hit[0], 4)}, step {res.step:.4f}")
    if hit is not None:
        print(f"ground energy estimate in original units: {float(smap.inverse(hit[0])):.4f}")


if __name__ == "__main__":
    main()
