"""Two-projector canonical form and the failure of amplify-R-then-check-Q.

Block conventions: for 0 < p < 1,

    q0 = sqrt(p) r0 - sqrt(1-p) r1        r0 = sqrt(p) q0 + sqrt(1-p) q1
    q1 = sqrt(1-p) r0 + sqrt(p) r1        r1 = -sqrt(1-p) q0 + sqrt(p) q1

with Q q_b = b q_b and R r_b = b r_b.  The right-hand pair is the inverse
of the left-hand rotation; the block is fixed by q1 (an eigenvector of
QRQ) and r1 = R q1 / sqrt(p).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    HermitianOperator,
    Projector,
    RegisterLayout,
    StateVector,
    ValidationError,
    make_rng,
    random_state,
    register_zero_projector,
    spectral_decompose,
)
from .amplification import amplify
from .filters import phase_estimation_unitary
from .hamiltonians import normalize_spectrum

EDGE_TOL = 1e-8
BORDERLINE_TOL = 1e-6


@dataclass(frozen=True)
class JordanBlock:
    p: float
    q0: np.ndarray = field(repr=False)
    q1: np.ndarray = field(repr=False)
    r0: np.ndarray = field(repr=False)
    r1: np.ndarray = field(repr=False)
    borderline: bool = False

    def residuals(self) -> dict[str, float]:
        """Max-abs residual of each of the four block relations."""
        a, b = np.sqrt(self.p), np.sqrt(1 - self.p)
        return {
            "q0": float(np.max(np.abs(self.q0 - (a * self.r0 - b * self.r1)))),
            "q1": float(np.max(np.abs(self.q1 - (b * self.r0 + a * self.r1)))),
            "r0": float(np.max(np.abs(self.r0 - (a * self.q0 + b * self.q1)))),
            "r1": float(np.max(np.abs(self.r1 - (-b * self.q0 + a * self.q1)))),
        }


@dataclass(frozen=True)
class JordanDecomposition:
    """Blocks with 0 < p < 1 plus the unpaired edge directions.

    ``fixed``: common 1-eigenvectors of Q and R (p = 1).
    ``q_null``: image(Q) directions annihilated by R (p = 0 on the Q side).
    ``r_null``: image(R) directions annihilated by Q.
    Columns of each array are orthonormal.
    """

    blocks: list
    fixed: np.ndarray = field(repr=False)
    q_null: np.ndarray = field(repr=False)
    r_null: np.ndarray = field(repr=False)
    qrq_spectrum: np.ndarray = field(repr=False)
    rqr_spectrum: np.ndarray = field(repr=False)

    @property
    def p_values(self) -> np.ndarray:
        """p for every image(Q) direction: blocks, then fixed (1), then q_null (0)."""
        return np.concatenate([[b.p for b in self.blocks], np.ones(self.fixed.shape[1]), np.zeros(self.q_null.shape[1])])

    def q_eigenvectors(self) -> np.ndarray:
        """Columns q1 ordered like ``p_values``."""
        cols = [b.q1 for b in self.blocks]
        dim = self.fixed.shape[0]
        stack = np.array(cols).T if cols else np.zeros((dim, 0), dtype=complex)
        return np.hstack([stack, self.fixed, self.q_null])

    def rebuild_Q(self) -> np.ndarray:
        v = self.q_eigenvectors()
        return v @ v.conj().T

    def rebuild_R(self) -> np.ndarray:
        cols = [b.r1 for b in self.blocks]
        v = np.hstack([np.array(cols).T if cols else np.zeros((self.fixed.shape[0], 0)), self.fixed, self.r_null])
        return v @ v.conj().T

    def spectrum_mismatch(self) -> float:
        """Largest difference between the nonzero spectra of QRQ and RQR."""
        a = self.qrq_spectrum[self.qrq_spectrum > EDGE_TOL]
        b = self.rqr_spectrum[self.rqr_spectrum > EDGE_TOL]
        if a.size != b.size:
            return float("inf")
        return float(np.max(np.abs(np.sort(a) - np.sort(b)), initial=0.0))


def _image_basis(P: Projector) -> np.ndarray:
    return P.basis()


def jordan_decompose(Q: Projector, R: Projector) -> JordanDecomposition:
    if Q.dim != R.dim:
        raise ValidationError(f"projector dimensions differ: {Q.dim} vs {R.dim}")
    for name, P in (("Q", Q), ("R", R)):
        m = P.matrix
        if np.max(np.abs(m @ m - m)) > 1e-10 or np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValidationError(f"{name} is not an orthogonal projector")
    Qm, Rm = Q.matrix, R.matrix
    dim = Q.dim

    Bq = _image_basis(Q)
    ps, vs = np.linalg.eigh(Bq.conj().T @ Rm @ Bq)
    qvecs = Bq @ vs
    ps = np.clip(ps, 0.0, 1.0)

    blocks, fixed, q_null = [], [], []
    for p, q1 in zip(ps, qvecs.T):
        if p > 1 - EDGE_TOL:
            fixed.append(q1)
        elif p < EDGE_TOL:
            q_null.append(q1)
        else:
            r1 = Rm @ q1 / np.sqrt(p)
            r0 = (q1 - np.sqrt(p) * r1) / np.sqrt(1 - p)
            q0 = np.sqrt(p) * r0 - np.sqrt(1 - p) * r1
            border = p < BORDERLINE_TOL or p > 1 - BORDERLINE_TOL
            blocks.append(JordanBlock(float(p), q0, q1, r0, r1, border))

    Br = _image_basis(R)
    rs, rv = np.linalg.eigh(Br.conj().T @ Qm @ Br)
    r_null = [v for s, v in zip(rs, (Br @ rv).T) if s < EDGE_TOL]

    def cols(vs):
        return np.array(vs).T if vs else np.zeros((dim, 0), dtype=complex)

    return JordanDecomposition(blocks, cols(fixed), cols(q_null), cols(r_null), np.clip(ps, 0, 1), np.clip(rs, 0, 1))


def random_projector(dim: int, rank: int, rng: np.random.Generator) -> Projector:
    z = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    q, _ = np.linalg.qr(z)
    return Projector.from_basis(q)


# -- naive algorithm ---------------------------------------------------------


def naive_overlap_formula(weights, probs) -> float:
    """Residual <psi'|Q|psi'> = sum w p^2 / sum w p after amplifying R."""
    w = np.asarray(weights, dtype=float)
    p = np.asarray(probs, dtype=float)
    if abs(w.sum() - 1) > 1e-10:
        raise ValidationError(f"weights sum to {w.sum()}, expected 1")
    if np.any((p < 0) | (p > 1)):
        raise ValidationError("probabilities must lie in [0, 1]")
    den = float(np.dot(w, p))
    if den <= 0:
        raise ValidationError("sum of w p is zero: R has nothing to amplify")
    return float(np.dot(w, p**2) / den)


@dataclass(frozen=True)
class NaiveResult:
    residual_overlap: float
    predicted: float
    p: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    state: StateVector | None = field(default=None, repr=False)
    retries: int = 0
    iterations: int = 0


def threshold_projector(H_normalized: HermitianOperator, E: float, k: int, decomp=None) -> Projector:
    """R = W^dagger (I (x) [readout y / 2^k < E]) W for the forward phase-estimation circuit W."""
    W = phase_estimation_unitary(H_normalized, k, decomp)
    M = 2**k
    accept = (np.arange(M) / M) < E
    mask = np.tile(accept, H_normalized.dim)
    Pi = np.diag(mask.astype(complex))
    Rm = W.conj().T @ Pi @ W
    return Projector((Rm + Rm.conj().T) / 2)


def run_naive_demo(H: HermitianOperator, E: float, k: int, seed: int, max_retries: int = 64, delta: float = 0.125) -> NaiveResult:
    """Amplify "phase estimation reads below E" on a random |psi>|0_k> and report what is left in image(Q).

    E is in normalized units.  Returns the simulated residual overlap with
    the all-zero ancilla projector and the closed-form prediction.
    """
    if not 0 < E < 1:
        raise ValidationError(f"threshold E={E} must lie in (0, 1)")
    Hn, _ = normalize_spectrum(H, delta)
    decomp = spectral_decompose(Hn)
    n = Hn.num_qubits
    layout = RegisterLayout(n, 0, 1, k)
    R = threshold_projector(Hn, E, k, decomp)
    Q = register_zero_projector(layout)
    rng = make_rng(seed)
    psi_sys = random_state(RegisterLayout(n), rng)
    start = np.zeros(layout.shape, dtype=complex)
    start[:, 0, 0] = psi_sys.amplitudes
    psi = StateVector(start.ravel(), layout)

    V = decomp.eigenvectors
    weights = np.abs(V.conj().T @ psi_sys.amplitudes) ** 2
    basis_in = np.zeros((layout.dim, V.shape[1]), dtype=complex)
    basis_in.reshape(layout.shape + (V.shape[1],))[:, 0, 0, :] = V
    p = np.clip(np.real(np.einsum("ia,ia->a", basis_in.conj(), R.matrix @ basis_in)), 0, 1)

    out, rep = amplify(psi, R, max_retries, rng)
    if out is None:
        raise RuntimeError(f"R amplification failed after {max_retries} retries (q={rep.overlap:.3g})")
    Qv = Q.apply(out.amplitudes)
    residual = float(np.vdot(Qv, Qv).real)
    predicted = naive_overlap_formula(weights / weights.sum(), p)
    return NaiveResult(residual, predicted, p, weights, out, rep.retries, rep.iterations)
