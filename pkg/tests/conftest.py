"""Shared test helpers: independent oracles and random-circuit generation.

Oracles here deliberately use different algorithms from the package
(explicit kron embeddings, brute-force scans) so the tests cross-check
rather than mirror the implementation.
"""
import math

import numpy as np
import pytest

from entopt.circuit import Circuit, Gate, GateKind

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def kron_embed(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Embed a 1-qubit operator on `qubit` (LSB convention) in the full space."""
    left = np.eye(1 << (n - 1 - qubit), dtype=complex)
    right = np.eye(1 << qubit, dtype=complex)
    return np.kron(np.kron(left, op), right)


def collective_z_generator(n: int) -> np.ndarray:
    """G = sum_j Z_j / 2 as a dense matrix (oracle for the popcount path)."""
    g = np.zeros((1 << n, 1 << n), dtype=complex)
    for j in range(n):
        g += 0.5 * kron_embed(Z, j, n)
    return g


def brute_force_qfi(psi: np.ndarray) -> float:
    n = psi.size.bit_length() - 1
    g = collective_z_generator(n)
    mean = np.vdot(psi, g @ psi).real
    second = np.vdot(psi, g @ (g @ psi)).real
    return 4.0 * (second - mean * mean) / (n * n)


def partial_trace_oracle(psi: np.ndarray, keep: list[int]) -> np.ndarray:
    """Literal partial trace by explicit index summation (slow, independent)."""
    n = psi.size.bit_length() - 1
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    k = len(keep)
    rho = np.zeros((1 << k, 1 << k), dtype=complex)
    for r in range(1 << k):
        for c in range(1 << k):
            total = 0.0 + 0.0j
            for e in range(1 << len(traced)):
                ri, ci = 0, 0
                for pos, q in enumerate(keep):
                    ri |= ((r >> pos) & 1) << q
                    ci |= ((c >> pos) & 1) << q
                for pos, q in enumerate(traced):
                    bit = (e >> pos) & 1
                    ri |= bit << q
                    ci |= bit << q
                total += psi[ri] * np.conj(psi[ci])
            rho[r, c] = total
    return rho


def entropy_of_eigenvalues(rho: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(rho)
    return float(-sum(v * math.log2(v) for v in vals if v > 1e-12))


def random_test_circuit(rng: np.random.Generator, n_qubits: int, n_gates: int, max_gates=None) -> Circuit:
    kinds = [k for k in GateKind if k.n_qubits <= n_qubits]
    gates = []
    for _ in range(n_gates):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind.n_qubits == 1:
            qubits = (int(rng.integers(n_qubits)),)
        else:
            a = int(rng.integers(n_qubits))
            b = int(rng.integers(n_qubits - 1))
            if b >= a:
                b += 1
            qubits = (a, b)
        angle = float(rng.uniform(0, 2 * math.pi)) if kind.has_angle else None
        gates.append(Gate(kind, qubits, angle))
    return Circuit(n_qubits, tuple(gates), max_gates or max(n_gates, 1))


@pytest.fixture(params=["python", "compiled"])
def kernels(request):
    """Run kernel-contract tests against both backends when available."""
    from entopt.backend import available_backends

    mods = available_backends()
    if request.param not in mods:
        pytest.skip(f"{request.param} backend not built")
    return mods[request.param]
