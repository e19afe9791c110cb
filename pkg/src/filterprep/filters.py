"""Momentum-state energy filter built from (inverse) phase estimation.

Phase convention: U = exp(-2 pi i H), so an eigenvector with normalized
energy phi picks up exp(-2 pi i phi) and the forward circuit
(Hadamards, controlled U^(2^b), readout transform) maps |a>|0_k> to
|a> (x) F|phi>, where F is the unitary readout transform
``F[y, j] = exp(+2 pi i y j / 2^k) / sqrt(2^k)``.  The momentum state |mu> is
fed to the inverse circuit in that readout basis, i.e. as F|mu>, which is
exactly what the forward circuit emits for an eigenphase mu.  The
amplitude left on |a>|0_k> is then <phi_a|mu>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    MAX_QUBITS,
    CapacityError,
    HermitianOperator,
    RegisterLayout,
    SpectralDecomposition,
    StateVector,
    ValidationError,
    spectral_decompose,
)


@dataclass(frozen=True)
class FilterSpec:
    mu: float
    eps: float
    k: int
    eta: int

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValidationError(f"filter centre mu={self.mu} must lie in (0, 1)")
        if not 0 < self.eps < 0.5:
            raise ValidationError(f"bandwidth eps={self.eps} must lie in (0, 1/2)")
        if self.k < 1 or self.eta < 1:
            raise ValidationError(f"need k >= 1 and eta >= 1, got k={self.k}, eta={self.eta}")

    @property
    def resolution(self) -> float:
        """Half-width inside which |<phi|mu>|^eta >= 1/2 is guaranteed."""
        return lower_bound_radius(self.k, self.eta)

    def premises_met(self, n: int) -> bool:
        """Whether k and eta satisfy the rules that guarantee the energy window."""
        ref = _rule_values(self.eps, n, self.mu)
        return self.k >= ref[0] and self.eta >= ref[1]


def momentum_state(mu: float, k: int) -> np.ndarray:
    """Amplitudes exp(-2 pi i mu j) / sqrt(2^k) over labels j = 0 .. 2^k - 1."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    M = 2**k
    j = np.arange(M)
    # reduce mu*j mod 1 first so large labels keep full precision
    return np.exp(-2j * np.pi * np.mod(mu * j, 1.0)) / math.sqrt(M)


def cyclic_distance(phi, mu):
    """|phi - mu| measured on the unit circle of phases, in [0, 1/2]."""
    d = np.mod(np.asarray(phi, dtype=float) - np.asarray(mu, dtype=float), 1.0)
    return np.minimum(d, 1.0 - d)


def momentum_overlap(phi, mu, k: int):
    """<phi|mu> = 2^-k sum_j exp(2 pi i j (phi - mu)), evaluated term by term.

    Broadcasts over array-valued ``phi`` and ``mu``.
    """
    d = np.asarray(phi, dtype=float) - np.asarray(mu, dtype=float)
    j = np.arange(2**k)
    out = np.exp(2j * np.pi * np.mod(np.multiply.outer(d, j), 1.0)).mean(axis=-1)
    return complex(out) if out.ndim == 0 else out


def overlap_upper_bound(phi, mu, k: int):
    """1 / (2^(k+1) |phi - mu|), distance taken cyclically."""
    d = cyclic_distance(phi, mu)
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / (2.0 ** (k + 1) * d)


def lower_bound_radius(k: int, eta: int) -> float:
    return 2.0**-k / (2 * math.pi * math.sqrt(eta))


def _ceil(x: float) -> int:
    # tolerate float noise on values that are integers in exact arithmetic
    return int(math.ceil(x - 1e-9))


def _rule_values(eps: float, n: int, mu: float) -> tuple[int, int]:
    L = math.log2(1 / eps)
    k = _ceil(2 * L)
    eta_upper = _ceil(1 + (n + 1) / L)
    eta_lower = _ceil(1 + (n + math.log2(mu)) / L)
    return k, max(eta_upper, eta_lower, 1)


def select_filter_params(eps: float, n: int, mu: float, max_qubits: int = MAX_QUBITS, scratchpad: int = 0) -> FilterSpec:
    """Smallest (k, eta) meeting both energy-window conditions.

    k = ceil(2 log2(1/eps)); eta is the larger of ceil(1 + (n+1)/log2(1/eps))
    and ceil(1 + (n + log2 mu)/log2(1/eps)).
    """
    if not 0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 1/2), got {eps}")
    if not 0 < mu < 1:
        raise ValidationError(f"mu must lie in (0, 1), got {mu}")
    k, eta = _rule_values(eps, n, mu)
    total = n + scratchpad + k * eta
    if total > max_qubits:
        raise CapacityError(f"filter needs {total} qubits (n={n}, k={k}, eta={eta}) but the cap is {max_qubits}")
    return FilterSpec(mu, eps, k, eta)


# -- circuit -----------------------------------------------------------------


def _check_phases(decomp: SpectralDecomposition):
    w = decomp.eigenvalues
    if w[0] <= 0 or w[-1] >= 1:
        raise ValidationError(
            f"eigenvalues span [{w[0]:.6g}, {w[-1]:.6g}]; phase estimation needs them strictly inside (0, 1). "
            "Run normalize_spectrum first."
        )


def _unitary_power(decomp: SpectralDecomposition, power: int) -> np.ndarray:
    """U^power for U = exp(-2 pi i H)."""
    phases = np.mod(decomp.eigenvalues * power, 1.0)
    return decomp.function(lambda _: np.exp(-2j * np.pi * phases))


def _on_system(mat: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.tensordot(mat, t, axes=(1, 0))


def _hadamard_block(t: np.ndarray, axis: int, k: int) -> np.ndarray:
    shape = t.shape
    t = np.moveaxis(t, axis, -1)
    mshape = t.shape
    t = t.reshape(mshape[:-1] + (2,) * k)
    for b in range(k):
        ax = t.ndim - 1 - b
        a0 = np.take(t, 0, axis=ax)
        a1 = np.take(t, 1, axis=ax)
        t = np.stack([(a0 + a1), (a0 - a1)], axis=ax) / math.sqrt(2)
    return np.moveaxis(t.reshape(mshape), -1, axis).reshape(shape)


def _controlled_powers(t: np.ndarray, axis: int, k: int, decomp: SpectralDecomposition, inverse: bool) -> np.ndarray:
    """Apply controlled U^(2^b) (or its inverse) with bit b of the block label as control."""
    t = np.moveaxis(t, axis, -1)
    mshape = t.shape
    t = t.reshape(mshape[:-1] + (2,) * k).copy()
    for b in range(k):
        ax = t.ndim - 1 - b  # bit b (value 2^b) is the b-th axis from the right
        U = _unitary_power(decomp, 2**b)
        if inverse:
            U = U.conj().T
        idx = [slice(None)] * t.ndim
        idx[ax] = 1
        t[tuple(idx)] = _on_system(U, t[tuple(idx)])
    return np.moveaxis(t.reshape(mshape), -1, axis)


def phase_estimation(t: np.ndarray, decomp: SpectralDecomposition, k: int, block_axes, inverse: bool = False) -> np.ndarray:
    """Run (inverse) phase estimation on every k-qubit block axis of ``t``.

    ``t`` has the system register on axis 0.  Each listed axis must have
    length 2^k; additional axes are carried along untouched.
    """
    for ax in block_axes:
        if inverse:
            t = np.fft.fft(t, axis=ax, norm="ortho")
            t = _controlled_powers(t, ax, k, decomp, inverse=True)
            t = _hadamard_block(t, ax, k)
        else:
            t = _hadamard_block(t, ax, k)
            t = _controlled_powers(t, ax, k, decomp, inverse=False)
            t = np.fft.ifft(t, axis=ax, norm="ortho")
    return t


def readout_momentum_state(mu: float, k: int) -> np.ndarray:
    """F|mu>: the momentum state written in the phase-estimation readout basis."""
    return np.fft.ifft(momentum_state(mu, k), norm="ortho")


def apply_inverse_phase_estimation(
    H_normalized: HermitianOperator,
    psi: StateVector | np.ndarray,
    spec: FilterSpec,
    decomp: SpectralDecomposition | None = None,
    max_qubits: int = MAX_QUBITS,
) -> StateVector:
    """Filtered state Phi from a system state psi.

    Prepares psi (x) (F|mu>)^(x eta) and applies the inverse of eta
    independent phase-estimation circuits.  The block of Phi with every
    ancilla at zero is sum_a alpha_a <phi_a|mu>^eta |a>.
    """
    decomp = decomp if decomp is not None else spectral_decompose(H_normalized)
    _check_phases(decomp)
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    n = H_normalized.num_qubits
    if amps.size != 2**n:
        raise ValidationError(f"system state has {amps.size} amplitudes, H acts on {2**n}")
    layout = RegisterLayout(n, 0, spec.eta, spec.k, max_qubits)
    anc = readout_momentum_state(spec.mu, spec.k)
    t = amps.reshape(2**n, 1)
    for _ in range(spec.eta):
        t = np.multiply.outer(t, anc)
    t = phase_estimation(t, decomp, spec.k, range(2, 2 + spec.eta), inverse=True)
    return StateVector(t.ravel(), layout)


def eigenbasis_zero_block(H_normalized: HermitianOperator, mu: float, k: int, decomp: SpectralDecomposition | None = None) -> np.ndarray:
    """Zero-readout amplitude of one inverse phase-estimation block, per eigenvector.

    Runs the single-block circuit on every eigenvector |a> (x) F|mu> at once.
    The eta blocks only interact through the system register, which stays in
    |a>, so the all-zero amplitude of the full filter on |a> is this value to
    the power eta.  Costs N^2 2^k instead of N 2^(k eta).
    """
    decomp = decomp if decomp is not None else spectral_decompose(H_normalized)
    _check_phases(decomp)
    V = decomp.eigenvectors
    t = np.multiply.outer(V, readout_momentum_state(mu, k))  # (system, eigenvector, block)
    t = phase_estimation(t, decomp, k, [2], inverse=True)
    # component along |a> of the zero-block slice for column a
    return np.einsum("ia,ia->a", V.conj(), t[:, :, 0])


def zero_block_amplitudes(eigenvalues, alphas, spec: FilterSpec) -> np.ndarray:
    """Closed-form coefficients alpha_a <phi_a|mu>^eta of the all-zero ancilla block."""
    return np.asarray(alphas) * momentum_overlap(np.asarray(eigenvalues), spec.mu, spec.k) ** spec.eta


def phase_estimation_unitary(H_normalized: HermitianOperator, k: int, decomp: SpectralDecomposition | None = None) -> np.ndarray:
    """Dense forward circuit on system (x) one k-qubit block.  Small sizes only."""
    decomp = decomp if decomp is not None else spectral_decompose(H_normalized)
    N, M = H_normalized.dim, 2**k
    eye = np.eye(N * M, dtype=complex).reshape(N, M, N * M)
    cols = phase_estimation(eye, decomp, k, [1])
    return cols.reshape(N * M, N * M)
