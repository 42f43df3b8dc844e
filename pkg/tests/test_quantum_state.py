import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qksvm.errors import ConfigurationError, UsageError
from qksvm.quantum_state import (
    DensityMatrix,
    Gate,
    PauliObservable,
    Statevector,
    apply_gate,
    cnot,
    h,
    new_zero_state,
    pauli_expectation,
    phase,
    reduced_density_matrix,
    run_circuit,
    rx,
    rz,
    s_dag,
    sampled_pauli_expectation,
)
from qksvm.validation import brute_force_state, dense_partial_trace, expm_minus_i, PAULI

from conftest import random_circuit, random_state_amplitudes


class TestZeroState:
    def test_single_qubit(self):
        assert_allclose(new_zero_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        assert_allclose(new_zero_state(2).amplitudes, [1, 0, 0, 0])

    def test_cap_enforced(self):
        with pytest.raises(ConfigurationError):
            new_zero_state(13)
        with pytest.raises(ConfigurationError):
            new_zero_state(0)


class TestGateValidation:
    def test_cnot_arity(self):
        with pytest.raises(UsageError):
            Gate("CNOT", (0,))

    def test_duplicate_qubits(self):
        with pytest.raises(UsageError):
            Gate("CNOT", (1, 1))

    def test_rotation_needs_angle(self):
        with pytest.raises(UsageError):
            Gate("RX", (0,))

    def test_h_takes_no_angle(self):
        with pytest.raises(UsageError):
            Gate("H", (0,), 0.3)

    def test_index_out_of_range_on_apply(self):
        with pytest.raises(UsageError):
            apply_gate(new_zero_state(2), h(5))


class TestApplyGate:
    def test_zero_angle_rotation_is_identity(self, rng):
        state = Statevector(3, random_state_amplitudes(rng, 3))
        out = apply_gate(state, rx(1, 0.0))
        assert_allclose(out.amplitudes, state.amplitudes, atol=1e-15)

    def test_cnot_truth_table(self):
        one_zero = Statevector(2, [0, 0, 1, 0])
        out = apply_gate(one_zero, cnot(0, 1))
        assert_allclose(out.amplitudes, [0, 0, 0, 1])

    def test_rx_pi_against_matrix_exponential(self):
        # dense oracle: exp(-i*pi*X/2)|0> = (0, -i)
        expected = expm_minus_i(0.5 * math.pi * PAULI["X"]) @ np.array([1, 0], complex)
        out = apply_gate(new_zero_state(1), rx(0, math.pi))
        assert_allclose(out.amplitudes, expected, atol=1e-15)
        assert_allclose(out.amplitudes, [0, -1j], atol=1e-12)

    def test_phase_gate(self):
        plus = apply_gate(new_zero_state(1), h(0))
        out = apply_gate(plus, phase(0, math.pi / 2))
        assert_allclose(out.amplitudes, [1 / math.sqrt(2), 1j / math.sqrt(2)], atol=1e-12)


class TestRunCircuit:
    def test_empty_circuit(self):
        assert_allclose(run_circuit(3, []).amplitudes, new_zero_state(3).amplitudes)

    def test_bell_construction(self):
        out = run_circuit(2, [h(0), cnot(0, 1)])
        r = 1 / math.sqrt(2)
        assert_allclose(out.amplitudes, [r, 0, 0, r], atol=1e-12)

    def test_random_circuits_match_dense_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 4))
            circuit = random_circuit(rng, n, 10)
            simulated = run_circuit(n, circuit).amplitudes
            expected = brute_force_state(n, circuit)
            assert np.max(np.abs(simulated - expected)) < 1e-12


class TestReducedDensityMatrix:
    def test_product_state_marginal(self):
        state = apply_gate(new_zero_state(2), h(1))  # |0> x |+>
        rho = reduced_density_matrix(state, [1])
        assert_allclose(rho.matrix, [[0.5, 0.5], [0.5, 0.5]], atol=1e-12)

    def test_bell_marginal_is_maximally_mixed(self):
        bell = run_circuit(2, [h(0), cnot(0, 1)])
        rho = reduced_density_matrix(bell, [0])
        assert_allclose(rho.matrix, [[0.5, 0], [0, 0.5]], atol=1e-12)

    def test_matches_dense_oracle(self, rng):
        state = Statevector(3, random_state_amplitudes(rng, 3))
        rho = reduced_density_matrix(state, [0, 2])
        expected = dense_partial_trace(state.amplitudes, (0, 2), 3)
        assert np.max(np.abs(rho.matrix - expected)) < 1e-12

    def test_keep_order_is_respected(self, rng):
        state = Statevector(3, random_state_amplitudes(rng, 3))
        ab = reduced_density_matrix(state, [0, 2]).matrix
        ba = reduced_density_matrix(state, [2, 0]).matrix
        swap = ab.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
        assert_allclose(ba, swap, atol=1e-14)

    def test_empty_keep_rejected(self):
        with pytest.raises(UsageError):
            reduced_density_matrix(new_zero_state(2), [])

    def test_bad_index_rejected(self):
        with pytest.raises(UsageError):
            reduced_density_matrix(new_zero_state(2), [3])


class TestPauliExpectation:
    def test_z_on_zero(self):
        rho = reduced_density_matrix(new_zero_state(1), [0])
        assert pauli_expectation(rho, PauliObservable((0,), "Z")) == 1.0

    def test_x_on_zero(self):
        rho = reduced_density_matrix(new_zero_state(1), [0])
        assert abs(pauli_expectation(rho, PauliObservable((0,), "X"))) < 1e-12

    def test_zz_on_bell(self):
        bell = run_circuit(2, [h(0), cnot(0, 1)])
        rho = reduced_density_matrix(bell, [0, 1])
        assert pauli_expectation(rho, PauliObservable((0, 1), "ZZ")) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_dimension_mismatch(self):
        rho = reduced_density_matrix(new_zero_state(2), [0])
        with pytest.raises(UsageError):
            pauli_expectation(rho, PauliObservable((0, 1), "ZZ"))

    def test_range_clamp(self, rng):
        for _ in range(20):
            state = Statevector(2, random_state_amplitudes(rng, 2))
            rho = reduced_density_matrix(state, [0, 1])
            for letters in ("XX", "YY", "ZZ", "XZ"):
                value = pauli_expectation(rho, PauliObservable((0, 1), letters))
                assert -1.0 <= value <= 1.0


class TestSampledExpectation:
    def test_z_on_zero_is_exact(self):
        state = new_zero_state(3)
        obs = PauliObservable((1,), "Z")
        for shots in (1, 7, 100):
            assert sampled_pauli_expectation(state, obs, shots, seed=shots) == 1.0

    def test_y_eigenstate_is_exact(self):
        state = Statevector(1, np.array([1, 1j]) / math.sqrt(2))
        obs = PauliObservable((0,), "Y")
        assert sampled_pauli_expectation(state, obs, 13, seed=5) == 1.0

    def test_zero_shots_rejected(self):
        with pytest.raises(UsageError):
            sampled_pauli_expectation(new_zero_state(1), PauliObservable((0,), "Z"), 0, 1)

    def test_unbiased_on_balanced_outcome(self):
        # <X> on |0> is 0; binomial statistics give se = 1/sqrt(seeds*shots)
        state = new_zero_state(1)
        obs = PauliObservable((0,), "X")
        shots, seeds = 4096, 200
        means = [sampled_pauli_expectation(state, obs, shots, seed=s) for s in range(seeds)]
        assert abs(np.mean(means)) < 3.0 / math.sqrt(seeds * shots)

    def test_determinism(self):
        state = apply_gate(new_zero_state(2), rx(0, 0.7))
        obs = PauliObservable((0, 1), "XZ")
        a = sampled_pauli_expectation(state, obs, 500, seed=99)
        b = sampled_pauli_expectation(state, obs, 500, seed=99)
        assert a == b

    def test_error_scales_as_inverse_sqrt_shots(self):
        state = apply_gate(new_zero_state(1), rx(0, 0.9))
        obs = PauliObservable((0,), "Z")
        shot_counts = [64, 256, 1024, 4096]
        stds = []
        for shots in shot_counts:
            estimates = [
                sampled_pauli_expectation(state, obs, shots, seed=1000 + s)
                for s in range(200)
            ]
            stds.append(np.std(estimates))
        slope = np.polyfit(np.log(shot_counts), np.log(stds), 1)[0]
        assert abs(slope + 0.5) < 0.1


class TestInvariants:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_norm_preserved_on_random_circuits(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        state = Statevector(n, random_state_amplitudes(rng, n))
        for gate in random_circuit(rng, n, 6):
            state = apply_gate(state, gate)
            assert abs(np.vdot(state.amplitudes, state.amplitudes).real - 1.0) < 1e-10

    def test_rdm_invariants_on_random_states(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            state = Statevector(n, random_state_amplitudes(rng, n))
            size = int(rng.integers(1, min(n, 3) + 1))
            keep = rng.choice(n, size=size, replace=False).tolist()
            rho = reduced_density_matrix(state, keep)  # constructor enforces invariants
            assert abs(np.trace(rho.matrix).real - 1.0) < 1e-10
            assert np.linalg.eigvalsh(rho.matrix).min() > -1e-9

    def test_statevector_rejects_unnormalized(self):
        with pytest.raises(UsageError):
            Statevector(1, [1.0, 1.0])

    def test_density_matrix_rejects_non_hermitian(self):
        with pytest.raises(UsageError):
            DensityMatrix(1, [[0.5, 0.5j], [0.5j, 0.5]])
