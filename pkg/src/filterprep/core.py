"""Dense state-vector substrate shared by every other module.

Register ordering is fixed: the system register is the most significant
tensor factor, followed by the scratchpad and then the ancilla blocks in the
order they are applied.  A flat amplitude index therefore reads
``system * 2**(h + eta*k) + scratch * 2**(eta*k) + block_0 * 2**((eta-1)*k) + ...``
and ``StateVector.tensor()`` exposes the matching axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 22
MAX_EIG_DIM = 2**12
DEGENERACY_TOL = 1e-10


class CapacityError(ValueError):
    """A register or matrix would exceed the configured size caps."""


class ValidationError(ValueError):
    """Input violates an operation's preconditions."""


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must be exact came out outside its tolerance."""


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Seeded generator for the stream named by ``keys``.

    Streams with different keys are statistically independent, so parallel
    tasks can each derive their own without coordination.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class RegisterLayout:
    system_qubits: int
    scratchpad_qubits: int = 0
    ancilla_blocks: int = 1
    block_qubits: int = 0
    max_qubits: int = MAX_QUBITS

    def __post_init__(self):
        counts = (self.system_qubits, self.scratchpad_qubits, self.ancilla_blocks, self.block_qubits)
        if min(counts) < 0:
            raise ValidationError(f"register counts must be non-negative, got {counts}")
        if self.ancilla_blocks < 1:
            raise ValidationError("ancilla_blocks must be >= 1")
        if self.total_qubits > self.max_qubits:
            raise CapacityError(
                f"{self.total_qubits} qubits (n={self.system_qubits}, h={self.scratchpad_qubits}, "
                f"eta={self.ancilla_blocks}, k={self.block_qubits}) exceeds the cap of {self.max_qubits}"
            )

    @property
    def ancilla_qubits(self) -> int:
        return self.ancilla_blocks * self.block_qubits if self.block_qubits else 0

    @property
    def total_qubits(self) -> int:
        return self.system_qubits + self.scratchpad_qubits + self.ancilla_qubits

    @property
    def dim(self) -> int:
        return 2**self.total_qubits

    @property
    def system_dim(self) -> int:
        return 2**self.system_qubits

    @property
    def shape(self) -> tuple[int, ...]:
        """Tensor shape: (system, scratchpad, block_0, ..., block_{eta-1})."""
        blocks = (2**self.block_qubits,) * self.ancilla_blocks if self.block_qubits else ()
        return (self.system_dim, 2**self.scratchpad_qubits) + blocks

    def with_ancillas(self, blocks: int, block_qubits: int) -> "RegisterLayout":
        return RegisterLayout(self.system_qubits, self.scratchpad_qubits, blocks, block_qubits, self.max_qubits)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        amps = _freeze(np.ravel(self.amplitudes))
        if amps.size != self.layout.dim:
            raise ValidationError(f"{amps.size} amplitudes do not match layout dimension {self.layout.dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            if norm == 0:
                raise NumericalConsistencyError("zero vector cannot be a state")
            amps = _freeze(amps / norm)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_system(cls, psi: np.ndarray, layout: RegisterLayout | None = None) -> "StateVector":
        psi = np.asarray(psi, dtype=complex)
        if layout is None:
            layout = RegisterLayout(int(np.log2(psi.size)))
        return cls(psi, layout)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class HermitianOperator:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"operator must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
            raise ValidationError(f"operator {self.label!r} is not Hermitian")
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_qubits(self) -> int:
        return int(round(np.log2(self.dim)))


class Projector:
    """Orthogonal projector, stored densely or as a 0/1 diagonal mask.

    The mask form keeps register projectors such as "all ancillas zero"
    cheap on large layouts where a dense D x D matrix would not fit.
    """

    def __init__(self, matrix: np.ndarray | None = None, *, mask: np.ndarray | None = None, check: bool = True):
        if (matrix is None) == (mask is None):
            raise ValidationError("give exactly one of matrix or mask")
        if mask is not None:
            self._mask = np.asarray(mask, dtype=bool).ravel().copy()
            self._mask.setflags(write=False)
            self._matrix = None
            self.dim = self._mask.size
            self.rank = int(self._mask.sum())
            return
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"projector must be square, got shape {m.shape}")
        self._matrix = _freeze(m)
        self._mask = None
        self.dim = m.shape[0]
        tr = float(np.trace(m).real)
        self.rank = int(round(tr))
        if check:
            if np.max(np.abs(m @ m - m), initial=0.0) > 1e-10 or np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
                raise ValidationError("matrix is not an orthogonal projector")
            if abs(self.rank - tr) > 1e-8:
                raise ValidationError(f"projector trace {tr} is not an integer rank")

    @classmethod
    def from_basis(cls, vectors: np.ndarray) -> "Projector":
        """Projector onto the span of orthonormal columns."""
        v = np.asarray(vectors, dtype=complex)
        return cls(v @ v.conj().T)

    @property
    def is_mask(self) -> bool:
        return self._mask is not None

    @property
    def mask(self) -> np.ndarray:
        if self._mask is None:
            raise ValidationError("dense projector has no mask form")
        return self._mask

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            return np.diag(self._mask.astype(complex))
        return self._matrix

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self._mask is not None:
            return np.where(self._mask, vec, 0)
        return self._matrix @ vec

    def basis(self) -> np.ndarray:
        """Orthonormal columns spanning the image."""
        if self._mask is not None:
            return np.eye(self.dim, dtype=complex)[:, self._mask]
        w, v = np.linalg.eigh(self._matrix)
        return v[:, w > 0.5]


def register_zero_projector(layout: RegisterLayout, *, scratchpad: bool = False, ancillas: bool = True) -> Projector:
    """Projector onto the selected registers all being |0...0>."""
    idx = [slice(None)] * len(layout.shape)
    mask = np.zeros(layout.shape, dtype=bool)
    if scratchpad:
        idx[1] = 0
    if ancillas:
        for ax in range(2, len(layout.shape)):
            idx[ax] = 0
    mask[tuple(idx)] = True
    return Projector(mask=mask.ravel())


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def function(self, f) -> np.ndarray:
        """Matrix f(A) evaluated through the eigenbasis."""
        v = self.eigenvectors
        return (v * f(self.eigenvalues)) @ v.conj().T


def _canonical_phase(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry made real positive (first index on ties)
    idx = np.argmax(np.abs(vecs) > np.abs(vecs).max(axis=0) - 1e-12, axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)


def spectral_decompose(op: HermitianOperator | np.ndarray, max_dim: int = MAX_EIG_DIM) -> SpectralDecomposition:
    """Exact eigendecomposition used as the ground-truth oracle.

    Eigenvalues come back ascending.  Within a degenerate group (gap below
    1e-10) the orthonormal basis returned by LAPACK is phase-fixed and then
    sorted lexicographically so that repeated calls agree.
    """
    if not isinstance(op, HermitianOperator):
        op = HermitianOperator(op)
    if op.dim > max_dim:
        raise CapacityError(f"dense eigensolve of dimension {op.dim} exceeds cap {max_dim}")
    w, v = np.linalg.eigh(op.matrix)
    v = _canonical_phase(v)
    order = np.arange(w.size)
    start = 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i] - w[i - 1] > DEGENERACY_TOL:
            if i - start > 1:
                block = v[:, start:i]
                keys = np.round(np.concatenate([block.real, block.imag]), 9)[::-1]
                order[start:i] = start + np.lexsort(keys)
            start = i
    w = w[order]
    v = _freeze(v[:, order])
    return SpectralDecomposition(_freeze_real(w), v)


def _freeze_real(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def random_state(layout: RegisterLayout, seed: int | np.random.Generator) -> StateVector:
    """Haar-random pure state on the full layout."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    z = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    return StateVector(z / np.linalg.norm(z), layout)


def measure_projector(state: StateVector, P: Projector, rng: np.random.Generator):
    """Projective measurement of {P, I-P}.

    Returns ``(outcome, collapsed, probability)`` where ``probability`` is the
    exact pre-measurement value of ``||P psi||^2``.
    """
    if P.dim != state.dim:
        raise ValidationError(f"projector dimension {P.dim} != state dimension {state.dim}")
    proj = P.apply(state.amplitudes)
    prob = float(np.vdot(proj, proj).real)
    if prob < -1e-12 or prob > 1 + 1e-12:
        raise NumericalConsistencyError(f"outcome probability {prob} outside [0, 1]")
    prob = min(max(prob, 0.0), 1.0)
    outcome = int(rng.random() < prob)
    kept = proj if outcome else state.amplitudes - proj
    return outcome, StateVector(kept, state.layout), prob


def expectation_value(state: StateVector, op: HermitianOperator | np.ndarray) -> float:
    """<psi|A|psi>.  An operator sized to the system register acts as A (x) I."""
    m = op.matrix if isinstance(op, HermitianOperator) else np.asarray(op)
    if m.shape[0] == state.dim:
        val = np.vdot(state.amplitudes, m @ state.amplitudes)
    elif m.shape[0] == state.layout.system_dim:
        t = state.amplitudes.reshape(state.layout.system_dim, -1)
        val = np.vdot(t, m @ t)
    else:
        raise ValidationError(f"operator dimension {m.shape[0]} matches neither state nor system register")
    if abs(val.imag) >= 1e-10:
        raise NumericalConsistencyError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out
