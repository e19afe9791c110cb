"""Witness preparation for a verifier circuit via switch-counting filters.

The recording circuit measures R, Q, R, ..., R (k odd) and writes each
outcome coherently onto a fresh ancilla with P (x) X + (I - P) (x) I.
Applied to |q1>|0_k> for a Jordan block with overlap p it produces

    sum_j sqrt(p)^(k - s) sqrt(1 - p)^s (-1)^l |r^{j_k}> |j>

where s counts switches and l counts adjacent 00 pairs along the record
(1, j_1, ..., j_k).  The leading 1 is the Q outcome of the input, so the
first recording already pays sqrt(1 - p) when j_1 = 0.  Record bit j_1 is
the most significant bit of the ancilla index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import (
    MAX_QUBITS,
    Projector,
    RegisterLayout,
    StateVector,
    ValidationError,
    make_rng,
    register_zero_projector,
)
from .amplification import DEFAULT_MAX_RETRIES, AmplificationReport, amplify, compute_overlap
from .jordan import jordan_decompose


@dataclass(frozen=True)
class SwitchStats:
    switches: int
    zero_pairs: int


def _bits(j) -> tuple[int, ...]:
    if isinstance(j, str):
        return tuple(int(c) for c in j)
    return tuple(int(b) for b in j)


def switch_stats(j) -> SwitchStats:
    """Adjacent-pair statistics of a bit string: #(j_i != j_i+1) and #(j_i = j_i+1 = 0)."""
    b = _bits(j)
    if not b:
        raise ValidationError("bit string must be non-empty")
    pairs = list(zip(b, b[1:]))
    return SwitchStats(sum(x != y for x, y in pairs), sum(x == y == 0 for x, y in pairs))


def record_stats(j) -> SwitchStats:
    """Statistics of the full record, i.e. of (1, j_1, ..., j_k)."""
    return switch_stats((1,) + _bits(j))


def record_amplitude(j, p: float) -> float:
    """sqrt(p)^(k-s) sqrt(1-p)^s (-1)^l for record j."""
    b = _bits(j)
    st = record_stats(b)
    k = len(b)
    return (-1) ** st.zero_pairs * math.sqrt(p) ** (k - st.switches) * math.sqrt(1 - p) ** st.switches


@lru_cache(maxsize=None)
def _record_table(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(switches, zero_pairs, last bit) for every record, indexed like the ancilla register."""
    idx = np.arange(2**k, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)  # j_1 is the MSB
    rec = np.hstack([np.ones((idx.size, 1), dtype=np.int8), bits])
    left, right = rec[:, :-1], rec[:, 1:]
    s = np.sum(left != right, axis=1)
    ell = np.sum((left == 0) & (right == 0), axis=1)
    last = bits[:, -1].astype(int)
    for a in (s, ell, last):
        a.setflags(write=False)
    return s, ell, last


def _check_k(k: int):
    if k < 1 or k % 2 == 0:
        raise ValidationError(f"k must be a positive odd integer, got {k}")


def switch_filter_state(mu: float, k: int) -> np.ndarray:
    """Ancilla state with amplitudes record_amplitude(j, mu), normalized.

    With the record convention the squared magnitudes are a product of k
    independent stay/switch weights, so the norm is already 1 for every mu;
    the explicit normalization only absorbs rounding.
    """
    _check_k(k)
    if not 0 <= mu <= 1:
        raise ValidationError(f"mu={mu} must lie in [0, 1]")
    s, ell, _ = _record_table(k)
    amp = (-1.0) ** ell * np.sqrt(mu) ** (k - s) * np.sqrt(1 - mu) ** s
    return amp / np.linalg.norm(amp)


def _record(t: np.ndarray, P: np.ndarray, axis: int) -> np.ndarray:
    # P (x) X + (I - P) (x) I  ==  t + P (X t - t)
    flipped = np.flip(t, axis=axis)
    return t + np.tensordot(P, flipped - t, axes=(1, 0))


def _switch_circuit(t: np.ndarray, Q: Projector, R: Projector, k: int, inverse: bool) -> np.ndarray:
    """t has the m-qubit register on axis 0 followed by k ancilla bit axes."""
    order = range(k - 1, -1, -1) if inverse else range(k)
    Qm, Rm = Q.matrix, R.matrix
    for i in order:
        t = _record(t, Rm if i % 2 == 0 else Qm, 1 + i)
    return t


def apply_switch_circuit(Q: Projector, R: Projector, psi: np.ndarray, k: int) -> np.ndarray:
    """Forward recording circuit on psi (x) |0_k>; returns the (dim, 2^k) output array."""
    _check_k(k)
    psi = np.asarray(psi, dtype=complex)
    if Q.dim != R.dim or psi.size != Q.dim:
        raise ValidationError(f"dimension mismatch: Q {Q.dim}, R {R.dim}, state {psi.size}")
    t = np.zeros((Q.dim,) + (2,) * k, dtype=complex)
    t[(slice(None),) + (0,) * k] = psi
    return _switch_circuit(t, Q, R, k, inverse=False).reshape(Q.dim, 2**k)


def apply_inverse_switch_circuit(
    Q: Projector, R: Projector, psi: StateVector | np.ndarray, mu: float, k: int, layout: RegisterLayout | None = None
) -> StateVector:
    """Inverse recording circuit on psi (x) |mu>_switch."""
    _check_k(k)
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    if Q.dim != R.dim or amps.size != Q.dim:
        raise ValidationError(f"dimension mismatch: Q {Q.dim}, R {R.dim}, state {amps.size}")
    if layout is None:
        m = int(round(math.log2(Q.dim)))
        layout = RegisterLayout(m, 0, 1, k)
    anc = switch_filter_state(mu, k).reshape((2,) * k)
    t = np.multiply.outer(amps, anc)
    t = _switch_circuit(t, Q, R, k, inverse=True)
    return StateVector(t.ravel(), layout)


# -- filter function ---------------------------------------------------------


MAX_ENUM_K = 21


@lru_cache(maxsize=None)
def _switch_counts(k: int) -> np.ndarray:
    """Number of records ending in 1 with s switches, s = 0 .. k.

    Enumerated for k <= MAX_ENUM_K.  Beyond that the tally C(k, s) for even s
    (zero for odd s) is used; the tests pin it to the enumeration.
    """
    if k <= MAX_ENUM_K:
        s, _, last = _record_table(k)
        c = np.bincount(s[last == 1], minlength=k + 1).astype(float)
    else:
        c = np.array([math.comb(k, j) if j % 2 == 0 else 0 for j in range(k + 1)], dtype=float)
    c.setflags(write=False)
    return c


def g_filter(p, mu: float, k: int):
    """Amplitude kept on |q1>|0_k> by the inverse circuit, by exact enumeration.

    Sum over records ending in 1 of sqrt(mu^(k-s) (1-mu)^s p^(k-s) (1-p)^s),
    with the records tallied by switch count.  Broadcasts over ``p``.
    """
    _check_k(k)
    c = _switch_counts(k)
    s = np.arange(k + 1)
    p_arr = np.asarray(p, dtype=float)
    a = np.sqrt(mu * p_arr)[..., None]
    b = np.sqrt((1 - mu) * (1 - p_arr))[..., None]
    out = np.sum(c * a ** (k - s) * b**s, axis=-1)
    return float(out) if out.ndim == 0 else out


def g_filter_binomial(p: float, mu: float, k: int) -> float:
    """Regrouped form sum_l C(k, 2l) sqrt(mu^(k-2l) (1-mu)^(2l) p^(k-2l) (1-p)^(2l)).

    Records ending in 1 have an even number of switches among their k
    transitions, so this equals ``g_filter``; it also stays cheap for large k.
    """
    _check_k(k)
    a = math.sqrt(mu * p)
    b = math.sqrt((1 - mu) * (1 - p))
    ls = np.arange(0, (k - 1) // 2 + 1)
    binom = np.array([math.comb(k, 2 * int(l)) for l in ls], dtype=float)
    return float(np.sum(binom * a ** (k - 2 * ls) * b ** (2 * ls)))


def g_filter_closed(p: float, mu: float, k: int) -> float:
    """((a + b)^k + (a - b)^k) / 2 with a = sqrt(mu p), b = sqrt((1-mu)(1-p))."""
    a = math.sqrt(mu * p)
    b = math.sqrt((1 - mu) * (1 - p))
    return 0.5 * ((a + b) ** k + (a - b) ** k)


def g_filter_gaussian(p: float, mu: float, eps: float) -> float:
    """Textbook approximation (1/2) exp(-(p - mu)^2 / (2 eps^2))."""
    return 0.5 * math.exp(-((p - mu) ** 2) / (2 * eps**2))


def k_for_bandwidth(mu: float, eps: float) -> int:
    """ceil(2 mu (1 - mu) / eps^2), bumped to the next odd integer."""
    k = max(1, math.ceil(2 * mu * (1 - mu) / eps**2 - 1e-9))
    return k if k % 2 else k + 1


TAIL_WIDTHS = 4.0
TAIL_SLACK = 1.5


def tail_ratio(mu: float, eps: float, widths: float = TAIL_WIDTHS, grid: int = 4001) -> float:
    """max over |p - mu| >= widths * eps of g(p, mu) / (exp(-widths^2 / 4) g(mu, mu)), k = k_for_bandwidth.

    With k = 2 mu (1 - mu) / eps^2 the amplitude g has variance 2 eps^2 in p, so a
    Gaussian of that width sits at exp(-widths^2 / 4) of its peak.  Values above
    1 mean a heavier tail than the Gaussian; returns 0 if no grid point is that far.
    """
    k = k_for_bandwidth(mu, eps)
    ps = np.linspace(0, 1, grid)
    far = ps[np.abs(ps - mu) >= widths * eps]
    if far.size == 0:
        return 0.0
    g = np.asarray(g_filter(far, mu, k)) if k <= MAX_ENUM_K else np.array([g_filter_closed(p, mu, k) for p in far])
    return float(g.max() / (math.exp(-(widths**2) / 4) * g_filter_closed(mu, mu, k)))


def filter_variance(mu: float, k: int, grid: int = 4001) -> float:
    """Variance in p of the normalized profile g(p, mu)^2 on [0, 1]."""
    ps = np.linspace(0, 1, grid)
    w = np.array([g_filter_closed(p, mu, k) for p in ps]) ** 2
    w /= w.sum()
    m = float(np.dot(w, ps))
    return float(np.dot(w, (ps - m) ** 2))


def effective_bandwidth(mu: float, k: int, N: int, grid: int = 2001) -> float:
    """Half-width eps' such that a non-aborting run has <R> within mu +- eps'.

    Given q >= 1/N^2, directions with |p - mu| >= d carry total weight at
    most N^2 max_{|p - mu| >= d} g(p, mu)^2, and |p - mu| <= 1, so
    |<R> - mu| <= d + N^2 G(d)^2.  Returns the minimum over d on a grid.
    """
    ps = np.linspace(0, 1, grid)
    g2 = np.array([g_filter_closed(p, mu, k) for p in ps]) ** 2
    dist = np.abs(ps - mu)
    best = 1.0
    for d in np.linspace(0, 1, grid):
        tail = g2[dist >= d]
        bound = d + (N**2 * tail.max() if tail.size else 0.0)
        best = min(best, bound)
    return float(min(best, 1.0))


# -- verifiers ---------------------------------------------------------------


@dataclass(frozen=True)
class VerifierCircuit:
    """Verifier V on m = n + h qubits, output on the first qubit.

    Accepting projector R = V^dagger (|1><1| (x) I) V, so that ||R psi||^2 is
    the probability of reading 1 after running V on psi.  Q projects the
    last h qubits (scratchpad) onto |0_h>.
    """

    V: np.ndarray
    n: int
    h: int
    u: float = 2 / 3
    v: float = 1 / 3
    label: str = ""

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        m = self.n + self.h
        if V.shape != (2**m, 2**m):
            raise ValidationError(f"V has shape {V.shape}, expected {(2**m, 2**m)} for n={self.n}, h={self.h}")
        if np.max(np.abs(V.conj().T @ V - np.eye(2**m))) > 1e-10:
            raise ValidationError("V is not unitary")
        if not self.u - self.v > 0:
            raise ValidationError(f"completeness u={self.u} must exceed soundness v={self.v}")
        object.__setattr__(self, "V", V)

    @property
    def m(self) -> int:
        return self.n + self.h

    @property
    def dim(self) -> int:
        return 2**self.m

    def Q(self) -> Projector:
        return register_zero_projector(RegisterLayout(self.n, self.h, 1, 0), scratchpad=True, ancillas=False)

    def R(self) -> Projector:
        accept = np.kron(np.diag([0.0, 1.0]), np.eye(self.dim // 2))
        Rm = self.V.conj().T @ accept @ self.V
        return Projector((Rm + Rm.conj().T) / 2)

    def acceptance_probability(self, psi: np.ndarray) -> float:
        out = (self.V @ psi).reshape(2, -1)
        return float(np.vdot(out[1], out[1]).real)


def identity_verifier() -> VerifierCircuit:
    """n = 1, h = 1, V = I: Q and R commute and Q R projects onto |1>|0>."""
    return VerifierCircuit(np.eye(4), 1, 1, label="identity")


def rotation_verifier(theta: float) -> VerifierCircuit:
    """Rotation by theta in the plane span{|10>, |01>} (witness, scratchpad).

    Q R Q has p = cos^2(theta) on |10> and p = 0 on |00>.
    """
    V = np.eye(4, dtype=complex)
    c, s = math.cos(theta), math.sin(theta)
    i10, i01 = 2, 1
    V[i10, i10], V[i01, i10] = c, s
    V[i10, i01], V[i01, i01] = -s, c
    return VerifierCircuit(V, 1, 1, label=f"rotation({theta:.6g})")


def xx_verifier(theta: float) -> VerifierCircuit:
    """V = exp(-i theta X (x) X): p = sin^2(theta) on |00>, cos^2(theta) on |10>."""
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    XX = np.kron(X, X)
    V = math.cos(theta) * np.eye(4) - 1j * math.sin(theta) * XX
    return VerifierCircuit(V, 1, 1, label=f"xx({theta:.6g})")


FIXTURES = {"identity": identity_verifier, "rotation": rotation_verifier, "xx": xx_verifier}


def initial_witness(verifier: VerifierCircuit, rng: np.random.Generator) -> np.ndarray:
    """V^dagger (|1> (x) Haar-random state on the other m - 1 qubits), a state in image(R)."""
    half = verifier.dim // 2
    z = rng.standard_normal(half) + 1j * rng.standard_normal(half)
    return verifier.V.conj().T @ np.concatenate([np.zeros(half), z / np.linalg.norm(z)])


def prepare_witness(
    verifier: VerifierCircuit,
    mu: float,
    eps: float,
    seed: int | np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
    k: int | None = None,
    max_qubits: int = MAX_QUBITS,
) -> tuple[StateVector | None, AmplificationReport]:
    """Prepare a witness whose acceptance probability is close to mu.

    The start state is V^dagger (|1> (x) Haar on m-1 qubits), which lies in
    image(R).  After the inverse recording circuit the all-zero block of
    Q (x) |0_k><0_k| is amplified with the same abort rule as the
    Hamiltonian filter, using N = 2^m.  On success the report's
    ``normalized_energy`` is ||R psi||^2 of the witness register.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    if not 0 < mu < 1:
        raise ValidationError(f"mu={mu} must lie in (0, 1)")
    k = k if k is not None else k_for_bandwidth(mu, eps)
    _check_k(k)
    layout = RegisterLayout(verifier.n, verifier.h, 1, k, max_qubits)

    psi = initial_witness(verifier, rng)
    Q, R = verifier.Q(), verifier.R()
    Phi = apply_inverse_switch_circuit(Q, R, psi, mu, k, layout)
    target = register_zero_projector(layout, scratchpad=True, ancillas=True)
    N = verifier.dim
    out, rep = amplify(Phi, target, max_retries, rng, abort_threshold=1.0 / N**2)
    m_hat = float(np.clip(2 * N * rep.overlap, 0, N))
    rep = replace(rep, m_hat=m_hat, mu=mu, eps=eps, k=k, eta=1, effective_bandwidth=effective_bandwidth(mu, k, N))
    if out is not None:
        w = out.amplitudes.reshape(verifier.dim, 2**k)[:, 0]
        acc = verifier.acceptance_probability(w / np.linalg.norm(w))
        rep = replace(rep, normalized_energy=acc, output_energy=acc)
    return out, rep


def witness_register(state: StateVector, verifier: VerifierCircuit) -> np.ndarray:
    """The m-qubit witness (+ scratchpad) part of a successful output, ancillas at zero."""
    return state.amplitudes.reshape(verifier.dim, -1)[:, 0]


def predicted_overlap(verifier: VerifierCircuit, psi: np.ndarray, mu: float, k: int) -> float:
    """sum_a |<r1_a|psi>|^2 g(p_a, mu)^2 from the Jordan decomposition (oracle path)."""
    J = jordan_decompose(verifier.Q(), verifier.R())
    total = sum(abs(np.vdot(b.r1, psi)) ** 2 * g_filter(b.p, mu, k) ** 2 for b in J.blocks)
    total += sum(abs(np.vdot(f, psi)) ** 2 * g_filter(1.0, mu, k) ** 2 for f in J.fixed.T)
    return float(total)
