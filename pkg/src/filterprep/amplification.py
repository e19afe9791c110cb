"""Grover amplification of the all-zero ancilla block, abort rule and mu sweep."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    MAX_QUBITS,
    HermitianOperator,
    Projector,
    RegisterLayout,
    StateVector,
    ValidationError,
    expectation_value,
    make_rng,
    measure_projector,
    random_state,
    register_zero_projector,
    spectral_decompose,
)
from .filters import FilterSpec, apply_inverse_phase_estimation, lower_bound_radius, select_filter_params
from .hamiltonians import normalize_spectrum

DEFAULT_MAX_RETRIES = 8


@dataclass(frozen=True)
class AmplificationReport:
    overlap: float
    iterations: int
    retries: int
    aborted: bool
    m_hat: float
    success_probability: float
    succeeded: bool = False
    output_energy: float | None = None  # original units
    normalized_energy: float | None = None
    mu: float | None = None
    eps: float | None = None
    k: int | None = None
    eta: int | None = None
    premises_met: bool = True
    effective_bandwidth: float | None = None


def compute_overlap(Phi: StateVector, Q: Projector) -> float:
    """||Q Phi||^2 read off the simulated state."""
    if Q.dim != Phi.dim:
        raise ValidationError(f"projector dimension {Q.dim} != state dimension {Phi.dim}")
    v = Q.apply(Phi.amplitudes)
    return float(np.vdot(v, v).real)


def grover_iterations(q: float) -> int:
    """Iteration count that rotates closest to the target.

    With theta = asin(sqrt(q)) this is round(pi/(4 theta) - 1/2), ties going
    to the smaller count; the success probability after m rounds is
    sin^2((2m + 1) theta).
    """
    if not 0 < q <= 1:
        raise ValidationError(f"overlap q={q} must lie in (0, 1]; q = 0 should have aborted")
    theta = math.asin(math.sqrt(min(q, 1.0)))
    x = math.pi / (4 * theta) - 0.5
    return max(0, math.ceil(x - 0.5 - 1e-9))


def rotation_success(q: float, m: int) -> float:
    return math.sin((2 * m + 1) * math.asin(math.sqrt(min(max(q, 0.0), 1.0)))) ** 2


def grover_step(psi: np.ndarray, Phi: np.ndarray, Q: Projector) -> np.ndarray:
    """One round: reflect about image(Q)^perp (I - 2Q), then about Phi."""
    psi = psi - 2 * Q.apply(psi)
    return 2 * np.vdot(Phi, psi) * Phi - psi


def amplify(
    Phi: StateVector,
    Q: Projector,
    max_retries: int = DEFAULT_MAX_RETRIES,
    rng: np.random.Generator | None = None,
    abort_threshold: float = 0.0,
    overlap_noise: float = 0.0,
) -> tuple[StateVector | None, AmplificationReport]:
    """Amplify image(Q) starting from Phi and measure Q.

    Each attempt re-prepares Phi, applies ``grover_iterations(q)`` rounds and
    measures; outcome 0 triggers another attempt, up to ``max_retries``
    retries.  ``overlap_noise`` perturbs the q used to pick the iteration
    count by a multiplicative Gaussian factor (the true q is still reported).
    """
    rng = rng if rng is not None else np.random.default_rng()
    q = compute_overlap(Phi, Q)
    N = Phi.layout.system_dim
    m_hat = float(np.clip(2 * N * q, 0, N))
    if q < abort_threshold or q <= 0:
        return None, AmplificationReport(q, 0, 0, True, m_hat, 0.0)

    q_est = q
    if overlap_noise:
        q_est = float(np.clip(q * (1 + overlap_noise * rng.standard_normal()), 1e-300, 1.0))
    m = grover_iterations(q_est)
    p_success = rotation_success(q, m)

    amps = Phi.amplitudes
    for _ in range(m):
        amps = grover_step(amps, Phi.amplitudes, Q)
    rotated = StateVector(amps, Phi.layout)

    for attempt in range(max_retries + 1):
        outcome, collapsed, _ = measure_projector(rotated, Q, rng)
        if outcome:
            report = AmplificationReport(q, m, attempt, False, m_hat, p_success, succeeded=True)
            return collapsed, report
    return None, AmplificationReport(q, m, max_retries, False, m_hat, p_success, succeeded=False)


def ancilla_projector(layout: RegisterLayout) -> Projector:
    return register_zero_projector(layout, scratchpad=False, ancillas=True)


def prepare_filtered_state(
    H: HermitianOperator,
    mu: float,
    eps: float,
    seed: int | np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
    spec: FilterSpec | None = None,
    delta: float = 0.125,
    overlap_noise: float = 0.0,
    max_qubits: int = MAX_QUBITS,
    normalized: tuple | None = None,
) -> tuple[StateVector | None, AmplificationReport]:
    """Prepare a state of normalized energy mu +- eps, or abort.

    ``mu`` and ``eps`` are in normalized units (the spectrum of H is mapped
    onto [delta, 1 - delta] first); the report carries the output energy in
    both normalized and original units.  ``normalized`` may pass a
    precomputed ``(H_norm, SpectrumMap, SpectralDecomposition)`` triple.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    if normalized is None:
        Hn, smap = normalize_spectrum(H, delta)
        decomp = spectral_decompose(Hn)
    else:
        Hn, smap, decomp = normalized
    n = Hn.num_qubits
    if spec is None:
        spec = select_filter_params(eps, n, mu, max_qubits)
    premises = spec.premises_met(n)

    psi = random_state(RegisterLayout(n), rng)
    Phi = apply_inverse_phase_estimation(Hn, psi, spec, decomp, max_qubits)
    Q = ancilla_projector(Phi.layout)
    N = 2**n
    out, report = amplify(Phi, Q, max_retries, rng, abort_threshold=1.0 / N**2, overlap_noise=overlap_noise)
    report = replace(report, mu=mu, eps=eps, k=spec.k, eta=spec.eta, premises_met=premises)
    if out is not None:
        e = expectation_value(out, Hn)
        report = replace(report, normalized_energy=e, output_energy=float(smap.inverse(e)))
    return out, report


@dataclass(frozen=True)
class SweepResult:
    trace: list  # [(mu, AmplificationReport)] in increasing mu
    step: float

    @property
    def first_success(self):
        for mu, rep in self.trace:
            if rep.succeeded:
                return mu, rep
        return None

    @property
    def ground_energy_estimate(self) -> float | None:
        hit = self.first_success
        return None if hit is None else hit[0]


def sweep_grid(n: int, eps: float, delta: float = 0.125, max_qubits: int = MAX_QUBITS) -> tuple[np.ndarray, FilterSpec]:
    """mu values stepping through [delta, 1 - delta] at the filter resolution."""
    ref = select_filter_params(eps, n, 0.5, max_qubits)
    step = lower_bound_radius(ref.k, ref.eta)
    count = int(math.floor((1 - 2 * delta) / step + 1e-9)) + 1
    return delta + step * np.arange(count), ref


def sweep_mu(
    H: HermitianOperator,
    eps: float,
    seed: int,
    delta: float = 0.125,
    max_retries: int = DEFAULT_MAX_RETRIES,
    max_qubits: int = MAX_QUBITS,
) -> SweepResult:
    """Scan the filter centre upwards; the first non-aborting mu estimates the ground energy.

    Each grid point gets its own RNG stream ``make_rng(seed, index)``.
    """
    Hn, smap = normalize_spectrum(H, delta)
    decomp = spectral_decompose(Hn)
    grid, ref = sweep_grid(Hn.num_qubits, eps, delta, max_qubits)
    trace = []
    for i, mu in enumerate(grid):
        spec = select_filter_params(eps, Hn.num_qubits, float(mu), max_qubits)
        _, rep = prepare_filtered_state(
            H, float(mu), eps, make_rng(seed, i), max_retries, spec, delta, normalized=(Hn, smap, decomp)
        )
        trace.append((float(mu), rep))
    return SweepResult(trace, lower_bound_radius(ref.k, ref.eta))
