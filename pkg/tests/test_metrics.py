"""QFI, entropy, ratio, and accumulated-error metrics against brute-force oracles."""
import math
import warnings

import numpy as np
import pytest

from entopt.circuit import Circuit, cx, cz, h, rx, rz
from entopt.metrics import (
    MetricsRecord,
    accumulated_error,
    depth_ratio,
    entropy,
    entropy_noisy,
    evaluate_circuit,
    gate_ratio,
    layer_entropies,
    qfi,
    qfi_finite_difference,
    qubit_entropies,
)
from entopt.simulator import NoiseModel, density_from_state, run, zero_state
from conftest import (
    X,
    Y,
    Z,
    brute_force_qfi,
    entropy_of_eigenvalues,
    partial_trace_oracle,
    random_test_circuit,
)


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return (v / np.linalg.norm(v)).astype(np.complex128)


def bell_state():
    return run(Circuit(2, (h(0), cx(0, 1))))


def ghz(n):
    gates = (h(0),) + tuple(cx(i, i + 1) for i in range(n - 1))
    return run(Circuit(n, gates, max_gates=n))


def w3_state():
    psi = np.zeros(8, dtype=np.complex128)
    psi[1] = psi[2] = psi[4] = 1.0 / math.sqrt(3)
    return psi


class TestQfi:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_computational_zero(self, n):
        assert qfi(zero_state(n)) == 0.0

    def test_bell_is_heisenberg(self):
        assert qfi(bell_state()) == pytest.approx(1.0, abs=1e-12)

    def test_plus_plus_half(self):
        psi = run(Circuit(2, (h(0), h(1))))
        assert qfi(psi) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_plus_n_scales_as_inverse_n(self, n):
        psi = run(Circuit(n, tuple(h(q) for q in range(n)), max_gates=n))
        assert qfi(psi) == pytest.approx(1.0 / n, abs=1e-12)

    def test_matches_brute_force_on_random_states(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            n = int(rng.integers(1, 7))
            psi = random_state(rng, n)
            assert qfi(psi) == pytest.approx(brute_force_qfi(psi), abs=1e-10)

    def test_bounds_and_clamp(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            v = qfi(random_state(rng, int(rng.integers(1, 6))))
            assert 0.0 <= v <= 1.0

    def test_z_basis_circuits_stay_zero(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            gates = []
            for _ in range(10):
                if rng.random() < 0.5:
                    gates.append(rz(int(rng.integers(3)), float(rng.uniform(0, 2 * math.pi))))
                else:
                    a = int(rng.integers(3))
                    b = (a + 1 + int(rng.integers(2))) % 3
                    gates.append(cz(a, b))
            assert qfi(run(Circuit(3, tuple(gates), 10))) == pytest.approx(0.0, abs=1e-12)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            qfi(np.array([1.0, 1.0], dtype=complex))


class TestQfiCrossCheck:
    def test_finite_difference_matches_analytic(self):
        rng = np.random.default_rng(24)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            psi = random_state(rng, n)
            assert qfi_finite_difference(psi) == pytest.approx(qfi(psi), abs=1e-6)

    def test_theta_independence(self):
        psi = bell_state()
        for theta in (0.0, 0.3, math.pi / 2, 2.5):
            assert qfi_finite_difference(psi, theta=theta) == pytest.approx(qfi(psi), abs=1e-6)


class TestEntropy:
    def test_product_basis_state(self):
        psi = np.zeros(8, dtype=np.complex128)
        psi[0b010] = 1.0
        assert entropy(psi) == 0.0

    def test_bell_maximal(self):
        assert entropy(bell_state()) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8])
    def test_ghz_maximal(self, n):
        assert entropy(ghz(n)) == pytest.approx(1.0, abs=1e-12)

    def test_w3_value(self):
        h2 = -(1 / 3) * math.log2(1 / 3) - (2 / 3) * math.log2(2 / 3)
        assert entropy(w3_state()) == pytest.approx(h2, abs=1e-12)
        assert entropy(w3_state()) == pytest.approx(0.9182958340544896, abs=1e-9)

    def test_matches_reduced_density_oracle(self):
        rng = np.random.default_rng(25)
        for _ in range(25):
            n = int(rng.integers(2, 5))
            psi = random_state(rng, n)
            expected = np.mean(
                [entropy_of_eigenvalues(partial_trace_oracle(psi, [q])) for q in range(n)]
            )
            assert entropy(psi) == pytest.approx(expected, abs=1e-10)

    def test_invariant_under_qubit_relabeling(self):
        rng = np.random.default_rng(26)
        psi = random_state(rng, 4)
        # swap qubits 0 and 3 by permuting basis indices
        perm = np.empty(16, dtype=int)
        for i in range(16):
            b0, b3 = i & 1, (i >> 3) & 1
            perm[i] = (i & 0b0110) | (b0 << 3) | b3
        assert entropy(psi[perm]) == pytest.approx(entropy(psi), abs=1e-12)

    def test_bell_plus_spectators(self):
        for k in (1, 2, 3):
            n = k + 2
            psi = run(Circuit(n, (h(0), cx(0, 1)), max_gates=4))
            assert entropy(psi) == pytest.approx(2.0 / n, abs=1e-12)

    def test_rejects_single_qubit(self):
        with pytest.raises(ValueError):
            entropy(zero_state(1))

    def test_bounds(self):
        rng = np.random.default_rng(27)
        for _ in range(50):
            assert 0.0 <= entropy(random_state(rng, int(rng.integers(2, 6)))) <= 1.0


class TestEntropyNoisy:
    def test_pure_bell_agrees(self):
        rho = density_from_state(bell_state())
        assert entropy_noisy(rho) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed_conflation(self):
        assert entropy_noisy(np.eye(4, dtype=complex) / 4) == pytest.approx(1.0, abs=1e-12)

    def test_depolarized_bell_against_oracle(self):
        p = 0.1
        rho = density_from_state(bell_state())
        # depolarize qubit 0: embed Paulis on the low bit
        def onq0(op):
            return np.kron(np.eye(2, dtype=complex), op)

        rho = (1 - p) * rho + (p / 3) * sum(onq0(P) @ rho @ onq0(P) for P in (X, Y, Z))
        value = entropy_noisy(rho)
        assert value <= 1.0 + 1e-9
        expected = 0.5 * (
            entropy_of_eigenvalues(np.trace(rho.reshape(2, 2, 2, 2), axis1=0, axis2=2))
            + entropy_of_eigenvalues(np.trace(rho.reshape(2, 2, 2, 2), axis1=1, axis2=3))
        )
        assert value == pytest.approx(expected, abs=1e-10)


class TestLayerEntropies:
    def test_bell_profile(self):
        np.testing.assert_allclose(layer_entropies(Circuit(2, (h(0), cx(0, 1)))), [0.0, 1.0], atol=1e-12)

    def test_empty(self):
        assert layer_entropies(Circuit(3)).size == 0

    def test_all_h_layer(self):
        np.testing.assert_allclose(layer_entropies(Circuit(2, (h(0), h(1)))), [0.0], atol=1e-12)

    def test_matches_prefix_simulation(self):
        from entopt.circuit import layers as layer_sets

        rng = np.random.default_rng(28)
        c = random_test_circuit(rng, 3, 12)
        lays = layer_sets(c)
        got = layer_entropies(c)
        prefix: list = []
        for k, layer in enumerate(lays):
            prefix.extend(sorted(layer))
            sub = c.with_gates(tuple(c.gates[i] for i in prefix))
            assert got[k] == pytest.approx(entropy(run(sub)), abs=1e-12)


class TestRatios:
    def test_paper_depth_examples(self):
        assert depth_ratio(12, 8) == pytest.approx(1 / 3, abs=1e-9)
        assert depth_ratio(10, 10) == 0.0
        assert depth_ratio(12, 11) == pytest.approx(0.0833, abs=5e-5)

    def test_paper_gate_examples(self):
        assert gate_ratio(50, 40) == pytest.approx(0.2)
        assert gate_ratio(7, 7) == 0.0
        assert gate_ratio(14, 2) == pytest.approx(0.8571, abs=5e-5)

    def test_affine_formula_brute(self):
        rng = np.random.default_rng(29)
        for _ in range(1000):
            a = int(rng.integers(1, 200))
            b = int(rng.integers(0, 200))
            assert depth_ratio(a, b) == (a - b) / a
            assert gate_ratio(a, b) == (a - b) / a

    def test_degenerate_inputs_flagged(self):
        with pytest.warns(RuntimeWarning):
            assert depth_ratio(0, 5) == 0.0
        with pytest.warns(RuntimeWarning):
            assert gate_ratio(0, 5) == 0.0


class TestAccumulatedError:
    def test_empty(self):
        assert accumulated_error(Circuit(2), NoiseModel()) == 0.0

    def test_single_gate(self):
        c = Circuit(2, (h(0),))
        assert accumulated_error(c, NoiseModel(p1=0.001)) == pytest.approx(0.001, abs=1e-12)

    def test_ten_two_qubit_gates(self):
        c = Circuit(2, tuple(cx(0, 1) for _ in range(10)), 10)
        assert accumulated_error(c, NoiseModel(p2=0.01)) == pytest.approx(1 - 0.99**10, abs=1e-12)


class TestEvaluateCircuit:
    def test_bell_record(self):
        rec = evaluate_circuit(Circuit(2, (h(0), cx(0, 1))))
        assert rec.qfi_norm == pytest.approx(1.0, abs=1e-9)
        assert rec.entropy_norm == pytest.approx(1.0, abs=1e-9)
        assert rec.depth == 2 and rec.gates == 2
        assert rec.csv_row()[:4] == (rec.qfi_norm, rec.entropy_norm, 2, 2)

    def test_noisy_path_uses_density_entropy(self):
        ghz3 = Circuit(3, (h(0), cx(0, 1), cx(1, 2)))
        clean = evaluate_circuit(ghz3, noisy=False)
        noisy = evaluate_circuit(ghz3, NoiseModel(), noisy=True)
        assert noisy.entropy_norm < clean.entropy_norm
        assert noisy.qfi_norm == pytest.approx(clean.qfi_norm)  # QFI stays pure-state

    def test_qubit_entropies_helper(self):
        vals = qubit_entropies(run(Circuit(2, (h(0), cx(0, 1)))))
        np.testing.assert_allclose(vals, [1.0, 1.0], atol=1e-12)
