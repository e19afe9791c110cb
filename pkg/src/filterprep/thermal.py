"""Gibbs-weighted energy sampling on top of the energy filter."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import HermitianOperator, MAX_QUBITS, StateVector, ValidationError, make_rng, random_state, RegisterLayout, spectral_decompose
from .amplification import AmplificationReport, prepare_filtered_state
from .filters import eigenbasis_zero_block, lower_bound_radius, select_filter_params
from .hamiltonians import normalize_spectrum

MIN_TEMPERATURE = 1e-3


@dataclass(frozen=True)
class DensityOfStates:
    """Histogram of normalized energies on a grid of bin centres.

    ``exact`` comes from the spectral oracle (eigenvalue assigned to the
    nearest centre); ``estimated`` is m_hat = clip(2 N q, 0, N) with q the
    seed-averaged all-zero-ancilla overlap of the filter centred on the bin.
    Bins whose overlap falls below the abort threshold 1/N^2 are zeroed.
    """

    grid: np.ndarray
    exact: np.ndarray
    estimated: np.ndarray
    N: int
    eps: float
    k: int = 0
    eta: int = 0
    overlaps: np.ndarray = field(default=None, repr=False)

    def counts(self, source: str = "estimated") -> np.ndarray:
        if source not in ("estimated", "exact"):
            raise ValidationError(f"unknown density source {source!r}")
        return self.estimated if source == "estimated" else self.exact


def exact_histogram(eigenvalues, grid) -> np.ndarray:
    grid = np.asarray(grid)
    idx = np.argmin(np.abs(np.subtract.outer(np.asarray(eigenvalues), grid)), axis=1)
    return np.bincount(idx, minlength=grid.size).astype(float)


def estimate_dos(
    H: HermitianOperator,
    eps: float,
    seed: int,
    n_seeds: int = 8,
    step: float | None = None,
    delta: float = 0.125,
    max_qubits: int = MAX_QUBITS,
) -> DensityOfStates:
    """Filter-based density of states around [delta, 1 - delta].

    The default bin step is half the phase-estimation grid spacing 2^-k,
    never finer than the filter resolution 2^-k / (2 pi sqrt(eta)).  The
    grid overhangs the window by two grid spacings on each side so that
    eigenvalues at the window edges keep their whole filter lobe.

    The overlap per bin and seed is ||Q Phi||^2 = sum_a |alpha_a|^2 |c_a|^(2 eta)
    with c_a the zero-readout amplitude of a single simulated block on
    eigenvector a; this equals the full eta-block simulation exactly.
    """
    Hn, _ = normalize_spectrum(H, delta)
    decomp = spectral_decompose(Hn)
    n = Hn.num_qubits
    N = 2**n
    ref = select_filter_params(eps, n, 0.5, max_qubits)
    res = lower_bound_radius(ref.k, ref.eta)
    if step is None:
        step = max(res, 2.0 ** -ref.k / 2)
    if step < res - 1e-15:
        raise ValidationError(f"grid step {step} is finer than the filter resolution {res}")
    margin = min(2 * 2.0**-ref.k, delta / 2)
    count = int(math.floor((1 - 2 * delta + 2 * margin) / step + 1e-9)) + 1
    grid = delta - margin + step * np.arange(count)

    V = decomp.eigenvectors
    weights = np.array([np.abs(V.conj().T @ random_state(RegisterLayout(n), make_rng(seed, s)).amplitudes) ** 2 for s in range(n_seeds)])
    q = np.zeros(count)
    for b, mu in enumerate(grid):
        spec = select_filter_params(eps, n, float(mu), max_qubits)
        c = np.abs(eigenbasis_zero_block(Hn, spec.mu, spec.k, decomp)) ** (2 * spec.eta)
        q[b] = float(np.mean(weights @ c))
    est = np.clip(2 * N * q, 0, N)
    est[q < 1.0 / N**2] = 0.0
    exact = exact_histogram(decomp.eigenvalues, grid)
    return DensityOfStates(grid, exact, est, N, eps, ref.k, ref.eta, q)


def gibbs_weights(energies, counts, T: float, positive_exponent: bool = False) -> np.ndarray:
    """Normalized exp(-E/T) * counts (exp(+E/T) with ``positive_exponent``)."""
    if T <= 0:
        raise ValidationError(f"temperature must be positive, got {T}")
    counts = np.asarray(counts, dtype=float)
    if not np.any(counts > 0):
        raise ValidationError("density of states is empty")
    sgn = 1.0 if positive_exponent else -1.0
    logw = np.full(counts.shape, -np.inf)
    occ = counts > 0
    logw[occ] = sgn * np.asarray(energies, dtype=float)[occ] / T + np.log(counts[occ])
    w = np.exp(logw - logw[occ].max())
    return w / w.sum()


def sample_energy(
    dos: DensityOfStates,
    T: float,
    rng: np.random.Generator,
    source: str = "estimated",
    positive_exponent: bool = False,
    min_temperature: float = MIN_TEMPERATURE,
) -> int:
    """Index of a bin drawn with probability proportional to exp(-E_b/T) counts_b."""
    if T < min_temperature:
        raise ValidationError(f"temperature {T} is below the configured minimum {min_temperature}")
    w = gibbs_weights(dos.grid, dos.counts(source), T, positive_exponent)
    return int(rng.choice(w.size, p=w))


@dataclass(frozen=True)
class ThermalResult:
    state: StateVector | None
    bin: int | None
    energy: float | None  # normalized units of the sampled bin centre
    report: AmplificationReport
    attempts: int


def prepare_thermal_state(
    H: HermitianOperator,
    T: float,
    eps: float,
    seed: int,
    dos: DensityOfStates | None = None,
    max_attempts: int = 16,
    source: str = "estimated",
    positive_exponent: bool = False,
    delta: float = 0.125,
    n_seeds: int = 8,
    max_qubits: int = MAX_QUBITS,
) -> ThermalResult:
    """Sample a bin from the Gibbs-weighted density, then filter at its centre.

    An abort means the sampled bin held no eigenvalue after all, so a new
    bin is drawn, up to ``max_attempts`` times.
    """
    if dos is None:
        dos = estimate_dos(H, eps, seed, n_seeds, delta=delta, max_qubits=max_qubits)
    Hn, smap = normalize_spectrum(H, delta)
    decomp = spectral_decompose(Hn)
    rng = make_rng(seed, 1)
    report = None
    for attempt in range(1, max_attempts + 1):
        b = sample_energy(dos, T, rng, source, positive_exponent)
        mu = float(dos.grid[b])
        out, report = prepare_filtered_state(H, mu, eps, rng, delta=delta, max_qubits=max_qubits, normalized=(Hn, smap, decomp))
        if out is not None:
            return ThermalResult(out, b, mu, replace(report, retries=report.retries), attempt)
    return ThermalResult(None, None, None, report, max_attempts)
