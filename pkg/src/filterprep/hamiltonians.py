"""Model Hamiltonians and the affine map that puts a spectrum inside (0, 1)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    MAX_EIG_DIM,
    CapacityError,
    HermitianOperator,
    ValidationError,
    make_rng,
    spectral_decompose,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MODEL_KINDS = ("classical-ising", "transverse-ising", "random-two-local", "diagonal")


@dataclass(frozen=True)
class IsingParams:
    """Classical Ising couplings with spins sigma_i in {0, 1}.

    ``couplings`` maps ``(i, j)`` with ``i < j`` to J_ij; ``fields`` holds h_i.
    """

    n: int
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    fields: Sequence[float] = ()

    def __post_init__(self):
        for (i, j), J in self.couplings.items():
            if not i < j:
                raise ValidationError(f"coupling key ({i}, {j}) must satisfy i < j")
            if not (0 <= i and j < self.n):
                raise ValidationError(f"coupling ({i}, {j}) out of range for n={self.n}")
            if not np.isfinite(J):
                raise ValidationError(f"coupling ({i}, {j}) is not finite")
        if self.fields and len(self.fields) != self.n:
            raise ValidationError(f"expected {self.n} fields, got {len(self.fields)}")
        if not np.all(np.isfinite(np.asarray(self.fields, dtype=float))):
            raise ValidationError("fields must be finite")

    def field(self, i: int) -> float:
        return float(self.fields[i]) if self.fields else 0.0


def classical_energy(params: IsingParams, config: Sequence[int]) -> float:
    """sum_{i<j} J_ij s_i s_j + sum_i h_i s_i for a 0/1 configuration."""
    if len(config) != params.n:
        raise ValidationError(f"configuration has length {len(config)}, expected {params.n}")
    s = [int(b) for b in config]
    e = sum(J * s[i] * s[j] for (i, j), J in params.couplings.items())
    return float(e + sum(params.field(i) * s[i] for i in range(params.n)))


def _configs(n: int) -> np.ndarray:
    # qubit 0 is the most significant bit of the basis index
    idx = np.arange(2**n)
    return (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1


def _site_op(op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for q in range(n):
        out = np.kron(out, op if q in sites else PAULI["I"])
    return out


def _pair_op(a: np.ndarray, b: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for q in range(n):
        out = np.kron(out, a if q == i else b if q == j else PAULI["I"])
    return out


def _ising_params(n: int, params: Mapping) -> IsingParams:
    raw = params.get("couplings")
    if raw is None:
        raise ValidationError("classical-ising needs 'couplings'")
    couplings = {}
    items = raw.items() if isinstance(raw, Mapping) else ((tuple(c[:2]), c[2]) for c in raw)
    for key, J in items:
        i, j = (int(x) for x in (key.split(",") if isinstance(key, str) else key))
        couplings[(i, j)] = float(J)
    return IsingParams(n, couplings, tuple(float(h) for h in params.get("fields", ())))


def build_model(kind: str, n: int, params: Mapping | IsingParams | None = None, seed: int | None = None) -> HermitianOperator:
    """Dense Hamiltonian on n qubits.

    ``classical-ising``: params ``couplings`` ({"i,j": J} or [[i, j, J], ...])
    and optional ``fields``.  ``transverse-ising``: ``J``, ``g``, optional
    ``h`` and ``periodic``; H = J sum Z_i Z_{i+1} + g sum X_i + h sum Z_i.
    ``random-two-local``: seeded sum over all pairs of random Pauli-pair terms,
    optional ``scale``.  ``diagonal``: explicit ``spectrum`` of length 2**n.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if 2**n > MAX_EIG_DIM:
        raise CapacityError(f"n={n} gives dimension {2**n} above the dense cap {MAX_EIG_DIM}")
    params = {} if params is None else params

    if kind == "classical-ising":
        ip = params if isinstance(params, IsingParams) else _ising_params(n, params)
        if ip.n != n:
            raise ValidationError(f"params are for n={ip.n}, model asks for n={n}")
        diag = [classical_energy(ip, c) for c in _configs(n)]
        return HermitianOperator(np.diag(np.asarray(diag, dtype=complex)), f"classical-ising(n={n})")

    if kind == "transverse-ising":
        if "J" not in params or "g" not in params:
            raise ValidationError("transverse-ising needs 'J' and 'g'")
        J, g, h = float(params["J"]), float(params["g"]), float(params.get("h", 0.0))
        bonds = [(i, i + 1) for i in range(n - 1)]
        if params.get("periodic", False) and n > 2:
            bonds.append((0, n - 1))
        H = np.zeros((2**n, 2**n), dtype=complex)
        for i, j in bonds:
            H += J * _pair_op(PAULI["Z"], PAULI["Z"], i, j, n)
        for i in range(n):
            H += g * _site_op(PAULI["X"], [i], n) + h * _site_op(PAULI["Z"], [i], n)
        return HermitianOperator(H, f"transverse-ising(n={n}, J={J}, g={g})")

    if kind == "random-two-local":
        if seed is None:
            seed = params.get("seed")
        if seed is None:
            raise ValidationError("random-two-local needs a seed")
        rng = make_rng(int(seed), 2)
        scale = float(params.get("scale", 1.0))
        H = np.zeros((2**n, 2**n), dtype=complex)
        if n == 1:
            for a in "XYZ":
                H += scale * rng.standard_normal() * PAULI[a]
        for i in range(n):
            for j in range(i + 1, n):
                for a in "IXYZ":
                    for b in "IXYZ":
                        if a == b == "I":
                            continue
                        H += scale * rng.standard_normal() * _pair_op(PAULI[a], PAULI[b], i, j, n)
        return HermitianOperator(H, f"random-two-local(n={n}, seed={seed})")

    if kind == "diagonal":
        spec = params.get("spectrum")
        if spec is None or len(spec) != 2**n:
            raise ValidationError(f"diagonal needs 'spectrum' with {2**n} entries")
        return HermitianOperator(np.diag(np.asarray(spec, dtype=complex)), f"diagonal(n={n})")

    raise ValidationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


@dataclass(frozen=True)
class SpectrumMap:
    """x -> scale * x + offset, taking [min, max] onto [delta, 1 - delta]."""

    scale: float
    offset: float
    delta: float = 0.125

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError("scale must be positive")

    def forward(self, x):
        return self.scale * np.asarray(x) + self.offset

    def inverse(self, y):
        return (np.asarray(y) - self.offset) / self.scale

    def forward_width(self, w):
        return self.scale * w

    def inverse_width(self, w):
        return w / self.scale


def normalize_spectrum(op: HermitianOperator, delta: float = 0.125) -> tuple[HermitianOperator, SpectrumMap]:
    if not 0 < delta < 0.5:
        raise ValidationError(f"delta must lie in (0, 1/2), got {delta}")
    w = spectral_decompose(op).eigenvalues
    lo, hi = float(w[0]), float(w[-1])
    if hi - lo < 1e-12:
        smap = SpectrumMap(1.0, 0.5 - lo, delta)
    else:
        scale = (1 - 2 * delta) / (hi - lo)
        smap = SpectrumMap(scale, delta - scale * lo, delta)
    m = smap.scale * op.matrix + smap.offset * np.eye(op.dim)
    m = (m + m.conj().T) / 2
    return HermitianOperator(m, f"normalized({op.label})"), smap
