import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filterprep.amplification import amplify
from filterprep.core import CapacityError, Projector, RegisterLayout, StateVector, ValidationError, make_rng
from filterprep.jordan import jordan_decompose, random_projector
from filterprep.qma import (
    MAX_ENUM_K,
    TAIL_SLACK,
    VerifierCircuit,
    _record_table,
    _switch_counts,
    apply_inverse_switch_circuit,
    apply_switch_circuit,
    effective_bandwidth,
    filter_variance,
    g_filter,
    g_filter_binomial,
    g_filter_closed,
    g_filter_gaussian,
    identity_verifier,
    initial_witness,
    k_for_bandwidth,
    predicted_overlap,
    prepare_witness,
    record_amplitude,
    record_stats,
    rotation_verifier,
    switch_filter_state,
    switch_stats,
    tail_ratio,
    witness_register,
    xx_verifier,
)


class TestSwitchStats:
    @pytest.mark.parametrize(
        "bits, s, ell",
        [("0000", 0, 3), ("0011", 1, 1), ("0101", 3, 0), ("1111", 0, 0), ("1", 0, 0), ("10", 1, 0)],
    )
    def test_examples(self, bits, s, ell):
        st_ = switch_stats(bits)
        assert (st_.switches, st_.zero_pairs) == (s, ell)

    def test_record_prepends_one(self):
        assert record_stats("0") == switch_stats("10")
        assert record_stats("000") == switch_stats("1000")

    def test_empty(self):
        with pytest.raises(ValidationError):
            switch_stats("")

    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_table_matches_strings(self, k):
        s, ell, last = _record_table(k)
        for j in range(2**k):
            bits = format(j, f"0{k}b")
            st_ = record_stats(bits)
            assert (s[j], ell[j], last[j]) == (st_.switches, st_.zero_pairs, int(bits[-1]))


class TestSwitchState:
    def test_half_k3(self):
        v = switch_filter_state(0.5, 3)
        signs = np.array([1, -1, 1, 1, -1, 1, 1, 1])
        assert v == pytest.approx(signs / math.sqrt(8), abs=1e-15)

    def test_mu_one_is_all_ones(self):
        v = switch_filter_state(1.0, 5)
        assert abs(v[-1]) == pytest.approx(1.0)
        assert np.sum(np.abs(v[:-1])) == 0

    def test_mu_zero_alternates(self):
        # every transition switches: records 1,0,1,0,... so j = 0101...
        v = switch_filter_state(0.0, 5)
        assert abs(v[int("01010", 2)]) == pytest.approx(1.0)

    @given(st.floats(0, 1), st.sampled_from([1, 3, 5, 7, 9]))
    def test_unit_norm(self, mu, k):
        v = switch_filter_state(mu, k)
        s, _, _ = _record_table(k)
        raw = np.sqrt(mu) ** (k - s) * np.sqrt(1 - mu) ** s
        assert np.linalg.norm(raw) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", [0, 2, 4, -1])
    def test_even_k_rejected(self, k):
        with pytest.raises(ValidationError):
            switch_filter_state(0.5, k)

    def test_mu_out_of_range(self):
        with pytest.raises(ValidationError):
            switch_filter_state(1.2, 3)


def _forward_error(Q, R, k):
    J = jordan_decompose(Q, R)
    worst = 0.0
    s, _, last = _record_table(k)
    for b in J.blocks:
        out = apply_switch_circuit(Q, R, b.q1, k)
        expected = np.zeros_like(out)
        for j in range(2**k):
            r = b.r1 if last[j] else b.r0
            expected[:, j] = record_amplitude(format(j, f"0{k}b"), b.p) * r
        worst = max(worst, float(np.max(np.abs(out - expected))))
    return worst, len(J.blocks)


class TestForwardCircuit:
    def test_common_eigenvector(self):
        Q = Projector(np.diag([1.0, 0.0]))
        out = apply_switch_circuit(Q, Q, np.array([1.0, 0.0]), 5)
        assert abs(out[0, -1]) == pytest.approx(1.0)
        assert np.sum(np.abs(out)) == pytest.approx(1.0)

    def test_zero_and_plus(self):
        Q = Projector(np.diag([1.0, 0.0]))
        R = Projector(np.full((2, 2), 0.5))
        out = apply_switch_circuit(Q, R, np.array([1.0, 0.0]), 3)
        assert np.linalg.norm(out, axis=0) == pytest.approx(np.full(8, (1 / math.sqrt(2)) ** 3))
        plus, minus = np.array([1, 1]) / math.sqrt(2), np.array([1, -1]) / math.sqrt(2)
        for j in range(8):
            r = plus if j & 1 else minus
            assert abs(np.vdot(r, out[:, j])) == pytest.approx((1 / math.sqrt(2)) ** 3)

    @pytest.mark.parametrize("k", [3, 5, 7, 9])
    @pytest.mark.parametrize("seed", range(4))
    def test_amplitude_formula(self, k, seed):
        rng = make_rng(seed, k)
        dim = int(rng.integers(2, 17))
        rq, rr = (int(x) for x in rng.integers(1, dim, 2))
        err, _ = _forward_error(random_projector(dim, rq, rng), random_projector(dim, rr, rng), k)
        assert err < 1e-9

    def test_unitary(self):
        rng = make_rng(3)
        Q, R = random_projector(6, 2, rng), random_projector(6, 3, rng)
        psi = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        psi /= np.linalg.norm(psi)
        assert np.linalg.norm(apply_switch_circuit(Q, R, psi, 7)) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            apply_switch_circuit(Projector(np.eye(2)), Projector(np.eye(4)), np.ones(2), 3)


class TestInverseCircuit:
    @pytest.mark.parametrize("mu", [0.2, 0.5, 0.77])
    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_zero_block_amplitude(self, mu, k):
        rng = make_rng(11, k)
        Q, R = random_projector(8, 3, rng), random_projector(8, 4, rng)
        J = jordan_decompose(Q, R)
        for b in J.blocks:
            out = apply_inverse_switch_circuit(Q, R, b.r1, mu, k).amplitudes.reshape(8, 2**k)[:, 0]
            assert Q.apply(out) == pytest.approx(g_filter(b.p, mu, k) * b.q1, abs=1e-10)

    def test_round_trip(self):
        rng = make_rng(5)
        Q, R = random_projector(4, 2, rng), random_projector(4, 2, rng)
        psi = rng.standard_normal(4) + 0j
        psi /= np.linalg.norm(psi)
        fwd = apply_switch_circuit(Q, R, psi, 5)
        # the recording circuit is its own inverse when run in reverse order
        anc = fwd.T.reshape((2,) * 5 + (4,))
        t = np.moveaxis(anc, -1, 0)
        from filterprep.qma import _switch_circuit

        back = _switch_circuit(t, Q, R, 5, inverse=True).reshape(4, 32)
        assert back[:, 0] == pytest.approx(psi, abs=1e-12)
        assert np.linalg.norm(back[:, 1:]) < 1e-12


class TestFilterFunction:
    def test_edges(self):
        assert g_filter(1.0, 1.0, 9) == pytest.approx(1.0)
        assert g_filter(0.0, 0.3, 9) == 0.0
        assert g_filter(0.0, 0.0, 9) == 0.0

    @pytest.mark.parametrize("k", [1, 3, 9, 15, 21])
    @given(p=st.floats(0, 1), mu=st.floats(0, 1))
    @settings(max_examples=30, deadline=None)
    def test_three_forms_agree(self, k, p, mu):
        e = g_filter(p, mu, k)
        assert g_filter_binomial(p, mu, k) == pytest.approx(e, abs=1e-12)
        assert g_filter_closed(p, mu, k) == pytest.approx(e, abs=1e-12)

    @pytest.mark.parametrize("k", range(1, MAX_ENUM_K + 1, 2))
    def test_counts_are_even_binomials(self, k):
        expected = [math.comb(k, j) if j % 2 == 0 else 0 for j in range(k + 1)]
        assert list(_switch_counts(k)) == expected

    def test_large_k_uses_tally(self):
        assert g_filter(0.4, 0.4, 41) == pytest.approx(g_filter_closed(0.4, 0.4, 41), rel=1e-12)

    def test_broadcasts(self):
        ps = np.linspace(0, 1, 7)
        assert g_filter(ps, 0.3, 5) == pytest.approx([g_filter_closed(p, 0.3, 5) for p in ps])

    @pytest.mark.parametrize("k", [15, 17, 25, 51])
    @pytest.mark.parametrize("mu", [0.2, 0.35, 0.5, 0.65, 0.8])
    def test_peak_near_half(self, k, mu):
        assert abs(g_filter_closed(mu, mu, k) / g_filter_gaussian(mu, mu, 0.1) - 1) < 0.15

    @pytest.mark.parametrize("k", [3, 9, 15, 21])
    @pytest.mark.parametrize("mu", [0.2, 0.4, 0.5, 0.6, 0.8])
    def test_unimodal_with_peak_near_mu(self, k, mu):
        ps = np.linspace(0, 1, 2001)
        g = g_filter(ps, mu, k)
        i = int(np.argmax(g))
        d = np.diff(g)
        assert np.all(d[:i] >= -1e-15) and np.all(d[i:] <= 1e-15)
        assert abs(ps[i] - mu) <= 1 / k

    @pytest.mark.parametrize("mu", [0.3, 0.5, 0.7])
    def test_variance_of_squared_profile(self, mu):
        # measured: about 1.96 mu (1 - mu) / k at k = 201, tending to 2
        k = 201
        ratio = filter_variance(mu, k) * k / (mu * (1 - mu))
        assert 1.85 < ratio < 2.05

    @pytest.mark.parametrize("mu, eps", [(0.2, 0.1), (0.5, 0.05), (0.33, 0.08)])
    def test_k_for_bandwidth(self, mu, eps):
        k = k_for_bandwidth(mu, eps)
        assert k % 2 == 1
        assert k >= 2 * mu * (1 - mu) / eps**2 - 1e-9
        assert k - 2 <= 2 * mu * (1 - mu) / eps**2

    @pytest.mark.parametrize("mu", np.linspace(0.3, 0.7, 9))
    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.15])
    def test_tail_within_slack_in_central_band(self, mu, eps):
        assert tail_ratio(mu, eps) <= TAIL_SLACK

    @pytest.mark.parametrize("mu", [0.2, 0.8])
    def test_tail_heavier_near_window_ends(self, mu):
        # the filter is Gaussian in the angle asin(sqrt(p)), skewed in p
        assert tail_ratio(mu, 0.1) > 2.0

    @pytest.mark.parametrize("eps", [0.05, 0.1])
    def test_tail_lighter_than_gaussian_at_half(self, eps):
        assert tail_ratio(0.5, eps) < 1.0

    def test_effective_bandwidth_shrinks_with_k(self):
        assert effective_bandwidth(0.5, 41, 4) < effective_bandwidth(0.5, 9, 4) <= 1.0


class TestVerifier:
    def test_non_unitary(self):
        with pytest.raises(ValidationError):
            VerifierCircuit(np.ones((4, 4)), 1, 1)

    def test_shape(self):
        with pytest.raises(ValidationError):
            VerifierCircuit(np.eye(8), 1, 1)

    def test_thresholds(self):
        with pytest.raises(ValidationError):
            VerifierCircuit(np.eye(4), 1, 1, u=0.3, v=0.4)

    def test_identity_commutes(self):
        V = identity_verifier()
        Q, R = V.Q().matrix, V.R().matrix
        assert np.max(np.abs(Q @ R - R @ Q)) == 0
        assert np.diag(Q @ R) == pytest.approx([0, 0, 1, 0])

    @pytest.mark.parametrize("theta", [0.3, 0.7, 1.1])
    def test_rotation_p(self, theta):
        J = jordan_decompose(rotation_verifier(theta).Q(), rotation_verifier(theta).R())
        assert [b.p for b in J.blocks] == pytest.approx([math.cos(theta) ** 2])
        assert J.q_null.shape[1] == 1

    def test_xx_p(self):
        V = xx_verifier(0.4)
        ps = sorted(jordan_decompose(V.Q(), V.R()).p_values)
        assert ps == pytest.approx(sorted([math.sin(0.4) ** 2, math.cos(0.4) ** 2]))

    def test_acceptance_probability(self):
        V = rotation_verifier(0.5)
        assert V.acceptance_probability(np.array([0, 0, 1, 0], dtype=complex)) == pytest.approx(math.cos(0.5) ** 2)

    def test_initial_witness_in_image_of_R(self):
        V = xx_verifier(0.3)
        psi = initial_witness(V, make_rng(0))
        assert np.linalg.norm(V.R().apply(psi) - psi) < 1e-12
        assert np.linalg.norm(psi) == pytest.approx(1.0)


def _first_success(V, mu, k, seeds=range(20)):
    for s in seeds:
        out, rep = prepare_witness(V, mu, 0.1, s, k=k)
        if out is not None:
            return out, rep
    raise AssertionError("no seed succeeded")


class TestPrepareWitness:
    @pytest.mark.parametrize("theta", [0.3, 0.7, 1.1])
    def test_rotation_recovers_q1(self, theta):
        V = rotation_verifier(theta)
        b = jordan_decompose(V.Q(), V.R()).blocks[0]
        out, rep = _first_success(V, b.p, 9)
        w = witness_register(out, V)
        w = w / np.linalg.norm(w)
        assert abs(np.vdot(b.q1, w)) ** 2 >= 1 - 1e-6
        assert rep.output_energy == pytest.approx(b.p, abs=1e-9)

    @pytest.mark.parametrize("mu", [0.05, 0.95])
    def test_xx_selects_block(self, mu):
        V = xx_verifier(math.asin(math.sqrt(0.05)))
        J = jordan_decompose(V.Q(), V.R())
        b = min(J.blocks, key=lambda x: abs(x.p - mu))
        out, rep = _first_success(V, mu, 15)
        w = witness_register(out, V)
        assert abs(np.vdot(b.q1, w / np.linalg.norm(w))) ** 2 >= 1 - 1e-6

    def test_scratchpad_zero(self):
        V = xx_verifier(0.3)
        out, _ = _first_success(V, 0.3, 9)
        w = witness_register(out, V).reshape(2, 2)
        assert np.linalg.norm(w[:, 1]) < 1e-9

    @pytest.mark.parametrize("seed", range(6))
    def test_overlap_matches_jordan_prediction(self, seed):
        V = xx_verifier(0.5)
        _, rep = prepare_witness(V, 0.3, 0.1, seed, k=7)
        psi = initial_witness(V, make_rng(seed))
        assert rep.overlap == pytest.approx(predicted_overlap(V, psi, 0.3, 7), abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_commuting_reduces_to_grover(self, seed):
        V = identity_verifier()
        out, rep = prepare_witness(V, 1 - 1e-9, 0.1, seed)
        rng = make_rng(seed)
        psi = initial_witness(V, rng)
        P = Projector(np.diag([0.0, 0.0, 1.0, 0.0]))
        plain_out, plain = amplify(StateVector(psi, RegisterLayout(1, 1, 1, 0)), P, 8, rng, abort_threshold=1 / 16)
        assert (out is None) == (plain_out is None)
        assert rep.success_probability == pytest.approx(plain.success_probability, abs=1e-6)
        if out is not None:
            assert rep.output_energy == pytest.approx(1.0)
            assert np.abs(witness_register(out, V)) == pytest.approx([0, 0, 1, 0], abs=1e-9)

    def test_gap_aborts(self):
        # p = cos^2(1.1) ~ 0.2 and p = 0; nothing near 0.8
        V = rotation_verifier(1.1)
        aborts = sum(prepare_witness(V, 0.8, 0.1, s, k=13)[0] is None for s in range(10))
        assert aborts == 10

    def test_capacity(self):
        with pytest.raises(CapacityError):
            prepare_witness(rotation_verifier(0.5), 0.5, 0.01, 0)

    def test_mu_range(self):
        with pytest.raises(ValidationError):
            prepare_witness(identity_verifier(), 1.0, 0.1, 0)

    def test_deterministic(self):
        a = prepare_witness(xx_verifier(0.3), 0.3, 0.1, 7, k=9)[1]
        b = prepare_witness(xx_verifier(0.3), 0.3, 0.1, 7, k=9)[1]
        assert a == b
