import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filterprep import (
    CapacityError,
    FilterSpec,
    HermitianOperator,
    RegisterLayout,
    StateVector,
    ValidationError,
    apply_inverse_phase_estimation,
    cyclic_distance,
    lower_bound_radius,
    make_rng,
    momentum_overlap,
    momentum_state,
    normalize_spectrum,
    overlap_upper_bound,
    random_state,
    select_filter_params,
    spectral_decompose,
)
from filterprep.filters import eigenbasis_zero_block, phase_estimation_unitary, zero_block_amplitudes, readout_momentum_state

from conftest import random_hermitian


def zero_block(Phi: StateVector) -> np.ndarray:
    t = Phi.tensor()
    return t[(slice(None), 0) + (0,) * (t.ndim - 2)]


class TestMomentumState:
    def test_zero_centre_uniform(self):
        assert np.allclose(momentum_state(0.0, 3), np.full(8, 8**-0.5))

    def test_half_k1(self):
        assert np.allclose(momentum_state(0.5, 1), np.array([1, -1]) / math.sqrt(2))

    @given(st.floats(0, 1, exclude_max=True), st.integers(1, 12))
    def test_norm(self, mu, k):
        assert np.linalg.norm(momentum_state(mu, k)) == pytest.approx(1, abs=1e-12)

    def test_overlap_is_inner_product(self):
        k, phi, mu = 4, 0.31, 0.27
        assert momentum_overlap(phi, mu, k) == pytest.approx(np.vdot(momentum_state(phi, k), momentum_state(mu, k)))


class TestOverlap:
    def test_identical(self):
        assert momentum_overlap(0.37, 0.37, 6) == pytest.approx(1, abs=1e-15)

    def test_quarter_offset_vanishes(self):
        assert abs(momentum_overlap(0.5, 0.25, 2)) < 1e-15

    @settings(max_examples=200)
    @given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.integers(1, 10))
    def test_upper_bound(self, phi, mu, k):
        assert abs(momentum_overlap(phi, mu, k)) <= overlap_upper_bound(phi, mu, k) + 1e-12

    def test_literal_distance_breaks_upper_bound(self):
        # with |phi - mu| = 0.9 the phases are only 0.1 apart on the circle
        phi, mu, k = 0.95, 0.05, 2
        mag = abs(momentum_overlap(phi, mu, k))
        assert mag > 1 / (2 ** (k + 1) * abs(phi - mu))
        assert mag <= overlap_upper_bound(phi, mu, k)

    @settings(max_examples=200)
    @given(st.floats(0, 1, exclude_max=True), st.integers(1, 16), st.integers(1, 10), st.floats(-1, 1))
    def test_lower_bound(self, mu, eta, k, u):
        phi = (mu + u * lower_bound_radius(k, eta)) % 1.0
        assert abs(momentum_overlap(phi, mu, k)) ** eta >= 0.5 - 1e-9

    @pytest.mark.parametrize("k", [3, 5, 8])
    def test_peak_shape(self, k):
        mu = 0.4
        phi = mu + np.linspace(-0.5, 0.5, 4001)
        mag = np.abs(momentum_overlap(phi, mu, k))
        assert phi[np.argmax(mag)] == pytest.approx(mu)
        width = np.ptp(phi[mag >= mag.max() / 2])
        # full width at half maximum of the Dirichlet kernel is about 1.2 / 2^k
        assert 0.8 * 2.0**-k < width < 1.6 * 2.0**-k

    def test_cyclic_distance(self):
        assert cyclic_distance(0.95, 0.05) == pytest.approx(0.1)
        assert cyclic_distance(0.3, 0.3) == 0

    def test_broadcast(self):
        v = momentum_overlap(np.array([0.1, 0.2]), 0.1, 3)
        assert v.shape == (2,) and v[0] == pytest.approx(1)


class TestSelectParams:
    def test_quarter_eps(self):
        spec = select_filter_params(0.25, 4, 0.5)
        assert (spec.k, spec.eta) == (4, 4)

    def test_eps_half_rejected(self):
        with pytest.raises(ValidationError):
            select_filter_params(0.5, 2, 0.5)

    def test_eps_just_below_half(self):
        assert select_filter_params(0.49, 2, 0.5).k == 3

    @given(st.floats(1e-3, 0.49), st.floats(1e-3, 0.49))
    def test_monotone_k(self, a, b):
        lo, hi = sorted((a, b))
        assert select_filter_params(lo, 2, 0.5, 10**6).k >= select_filter_params(hi, 2, 0.5, 10**6).k

    def test_capacity_names_budget(self):
        with pytest.raises(CapacityError, match=r"n=4, k=14, eta=2"):
            select_filter_params(0.01, 4, 0.5)

    @pytest.mark.parametrize("mu", [0.0, 1.0])
    def test_mu_range(self, mu):
        with pytest.raises(ValidationError):
            select_filter_params(0.25, 2, mu)

    def test_premises(self):
        spec = select_filter_params(0.25, 3, 0.5)
        assert spec.premises_met(3)
        assert not FilterSpec(0.5, 0.25, spec.k - 1, spec.eta).premises_met(3)

    def test_resolution(self):
        spec = FilterSpec(0.5, 0.25, 4, 4)
        assert spec.resolution == pytest.approx(2**-4 / (2 * math.pi * 2))


class TestInversePhaseEstimation:
    def test_exact_phase_single_block(self):
        # eigenvalue 5/16 is representable with k = 4 bits
        H = HermitianOperator(np.diag([5 / 16, 11 / 16]))
        psi = StateVector(np.array([1, 0]), RegisterLayout(1))
        Phi = apply_inverse_phase_estimation(H, psi, FilterSpec(5 / 16, 0.25, 4, 1))
        t = Phi.tensor()
        assert abs(t[0, 0, 0]) == pytest.approx(1, abs=1e-12)

    def test_single_phase_spectrum(self):
        Hn, _ = normalize_spectrum(HermitianOperator(np.zeros((4, 4))))
        psi = random_state(RegisterLayout(2), 3)
        Phi = apply_inverse_phase_estimation(Hn, psi, FilterSpec(0.5, 0.25, 3, 2))
        assert np.allclose(zero_block(Phi), psi.amplitudes, atol=1e-12)
        assert np.linalg.norm(zero_block(Phi)) == pytest.approx(1, abs=1e-12)

    def test_closed_form_seed_11(self):
        rng = make_rng(11)
        Hn, _ = normalize_spectrum(HermitianOperator(random_hermitian(4, rng)))
        d = spectral_decompose(Hn)
        psi = random_state(RegisterLayout(2), rng)
        spec = FilterSpec(0.43, 0.25, 3, 2)
        Phi = apply_inverse_phase_estimation(Hn, psi, spec, d)
        alphas = d.eigenvectors.conj().T @ psi.amplitudes
        got = d.eigenvectors.conj().T @ zero_block(Phi)
        assert np.max(np.abs(got - zero_block_amplitudes(d.eigenvalues, alphas, spec))) < 1e-9

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.95), st.integers(1, 4), st.integers(1, 3))
    def test_closed_form_and_unitarity(self, seed, mu, k, eta):
        rng = make_rng(seed)
        Hn, _ = normalize_spectrum(HermitianOperator(random_hermitian(4, rng)))
        d = spectral_decompose(Hn)
        psi = random_state(RegisterLayout(2), rng)
        spec = FilterSpec(mu, 0.25, k, eta)
        Phi = apply_inverse_phase_estimation(Hn, psi, spec, d)
        # StateVector renormalizes, so check the raw map through its zero block and total weight
        alphas = d.eigenvectors.conj().T @ psi.amplitudes
        got = d.eigenvectors.conj().T @ zero_block(Phi)
        assert np.max(np.abs(got - zero_block_amplitudes(d.eigenvalues, alphas, spec))) < 1e-9
        assert np.linalg.norm(Phi.amplitudes) == pytest.approx(1, abs=1e-12)

    def test_raw_map_preserves_norm(self, small_hamiltonian):
        W = phase_estimation_unitary(small_hamiltonian, 3)
        assert np.max(np.abs(W.conj().T @ W - np.eye(W.shape[0]))) < 1e-12

    def test_forward_circuit_emits_readout_state(self, small_hamiltonian):
        d = spectral_decompose(small_hamiltonian)
        k = 3
        W = phase_estimation_unitary(small_hamiltonian, k, d)
        a = 2
        inp = np.kron(d.eigenvectors[:, a], np.eye(2**k)[0])
        expected = np.kron(d.eigenvectors[:, a], readout_momentum_state(d.eigenvalues[a], k))
        assert np.allclose(W @ inp, expected, atol=1e-12)

    def test_rejects_unnormalized(self):
        H = HermitianOperator(np.diag([-0.5, 0.5]))
        with pytest.raises(ValidationError, match="normalize_spectrum"):
            apply_inverse_phase_estimation(H, np.array([1, 0]), FilterSpec(0.5, 0.25, 2, 1))

    def test_capacity(self, small_hamiltonian):
        with pytest.raises(CapacityError):
            apply_inverse_phase_estimation(small_hamiltonian, np.array([1, 0, 0, 0]), FilterSpec(0.5, 0.01, 14, 2))

    def test_eigenbasis_block(self, small_hamiltonian):
        d = spectral_decompose(small_hamiltonian)
        c = eigenbasis_zero_block(small_hamiltonian, 0.37, 5, d)
        assert np.allclose(c, momentum_overlap(d.eigenvalues, 0.37, 5), atol=1e-12)
