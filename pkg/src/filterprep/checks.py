"""Batch numerical checks shared by the CLI tables, scripts and acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import make_rng
from .filters import lower_bound_radius, momentum_overlap, overlap_upper_bound
from .jordan import jordan_decompose, random_projector

CHUNK = 2048


@dataclass(frozen=True)
class UpperBoundCheck:
    k: int
    points: int
    max_violation: float  # max of |<phi|mu>| - bound, <= 0 when the bound holds
    violations: int  # count above the 1e-12 tolerance


def upper_bound_grid(ks=range(2, 9), points: int = 100_000, tol: float = 1e-12, cyclic: bool = True) -> list[UpperBoundCheck]:
    """|<phi|mu>| against 1/(2^(k+1) d) on an m x m grid of (phi, mu), m = ceil(sqrt(points)).

    ``cyclic=False`` uses the plain |phi - mu| as the distance, which the
    bound does not survive once the distance exceeds 1/2.
    """
    m = math.ceil(math.sqrt(points))
    g = np.arange(m) / m
    phi, mu = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    # the overlap depends on phi - mu only, which takes m distinct values mod 1 on this grid
    shift = np.mod(np.subtract.outer(np.arange(m), np.arange(m)).ravel(), m)
    out = []
    for k in ks:
        table = np.abs(momentum_overlap(np.arange(m) / m, 0.0, k))
        worst, count = -np.inf, 0
        for s in range(0, phi.size, CHUNK):
            p, u = phi[s : s + CHUNK], mu[s : s + CHUNK]
            mag = table[shift[s : s + CHUNK]]
            if cyclic:
                bound = overlap_upper_bound(p, u, k)
            else:
                with np.errstate(divide="ignore"):
                    bound = 1.0 / (2.0 ** (k + 1) * np.abs(p - u))
            finite = np.isfinite(bound)
            excess = mag[finite] - bound[finite]
            if excess.size:
                worst = max(worst, float(excess.max()))
                count += int(np.sum(excess > tol))
        out.append(UpperBoundCheck(int(k), int(phi.size), worst, count))
    return out


@dataclass(frozen=True)
class LowerBoundCheck:
    trials: int
    min_margin: float  # min of |<phi|mu>|^eta - 1/2
    failures: int


def lower_bound_trials(trials: int = 1000, seed: int = 0, max_eta: int = 16, max_k: int = 8, tol: float = 1e-9) -> LowerBoundCheck:
    """Random (mu, eta, k) with phi inside the guaranteed radius; half the trials sit on its edge."""
    rng = make_rng(seed)
    mu = rng.random(trials)
    eta = rng.integers(1, max_eta + 1, trials)
    k = rng.integers(1, max_k + 1, trials)
    u = rng.uniform(-1, 1, trials)
    edge = rng.random(trials) < 0.5
    u[edge] = np.sign(u[edge])
    worst, fails = np.inf, 0
    for i in range(trials):
        r = lower_bound_radius(int(k[i]), int(eta[i]))
        phi = (mu[i] + u[i] * r) % 1.0
        val = abs(momentum_overlap(phi, mu[i], int(k[i]))) ** int(eta[i]) - 0.5
        worst = min(worst, val)
        fails += val < -tol
    return LowerBoundCheck(trials, float(worst), int(fails))


@dataclass(frozen=True)
class JordanCheck:
    index: int
    dim: int
    rank_q: int
    rank_r: int
    blocks: int
    max_residual: float
    spectrum_mismatch: float
    reconstruction_error: float


def jordan_pairs(count: int = 200, max_dim: int = 64, seed: int = 0) -> list[JordanCheck]:
    """Decompose ``count`` random projector pairs and report the worst residual per pair."""
    out = []
    for i in range(count):
        rng = make_rng(seed, i)
        dim = int(rng.integers(2, max_dim + 1))
        rq, rr = (int(x) for x in rng.integers(1, dim, 2))
        Q, R = random_projector(dim, rq, rng), random_projector(dim, rr, rng)
        J = jordan_decompose(Q, R)
        res = max((max(b.residuals().values()) for b in J.blocks), default=0.0)
        rec = max(np.max(np.abs(J.rebuild_Q() - Q.matrix)), np.max(np.abs(J.rebuild_R() - R.matrix)))
        out.append(JordanCheck(i, dim, rq, rr, len(J.blocks), float(res), J.spectrum_mismatch(), float(rec)))
    return out


__all__ = [
    "UpperBoundCheck",
    "LowerBoundCheck",
    "JordanCheck",
    "upper_bound_grid",
    "lower_bound_trials",
    "jordan_pairs",
]
