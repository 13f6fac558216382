"""Exact quantum simulation.

Statevector evolution for ideal circuits and density-matrix evolution with
depolarizing + thermal-relaxation channels for noisy ones. Qubit 0 is the
least-significant bit of the basis index, so CX(0,1) maps |01> -> |11|
(basis index 1 -> 3).

Density matrices are evolved through the same statevector kernels: with a
row-major flatten of rho, K rho Kdag is K applied to the row-bit copy of a
qubit (position q+n) followed by conj(K) on the column bit (position q).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .circuit import Circuit, Gate, GateKind

STATEVECTOR_LIMIT = 20
DENSITY_LIMIT = 10


class ResourceLimitError(RuntimeError):
    """Circuit exceeds the configured simulation size limits."""


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_H = np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=np.complex128)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)
_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.diag([1, -1]).astype(np.complex128)


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=np.complex128)


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of a gate: 2x2, or 4x4 indexed by 2*bit_first + bit_second."""
    if g.kind is GateKind.H:
        return _H.copy()
    if g.kind is GateKind.RX:
        return _rx(g.angle)
    if g.kind is GateKind.RZ:
        return _rz(g.angle)
    if g.kind is GateKind.CX:
        return _CX.copy()
    if g.kind is GateKind.CZ:
        return _CZ.copy()
    if g.kind is GateKind.SWAP:
        return _SWAP.copy()
    u = np.eye(4, dtype=np.complex128)
    u[2:, 2:] = _rx(g.angle)  # control = first qubit = high bit of the pair index
    return u


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def _apply_gate_inplace(psi: np.ndarray, g: Gate) -> None:
    u = gate_matrix(g)
    if len(g.qubits) == 1:
        backend.apply_1q(psi, u, g.qubits[0])
    else:
        backend.apply_2q(psi, u, g.qubits[0], g.qubits[1])


def apply_gate(psi: np.ndarray, g: Gate) -> np.ndarray:
    """Return U_g |psi> (pure; the input is not mutated)."""
    n = psi.size.bit_length() - 1
    if psi.size != 1 << n:
        raise ValueError("statevector length must be a power of two")
    for q in g.qubits:
        if not 0 <= q < n:
            raise ValueError(f"gate qubits {g.qubits} out of range for n={n}")
    out = np.ascontiguousarray(psi, dtype=np.complex128).copy()
    _apply_gate_inplace(out, g)
    return out


def run(c: Circuit, limit: int = STATEVECTOR_LIMIT) -> np.ndarray:
    """Statevector of the circuit applied to |0...0>."""
    if c.n_qubits > limit:
        raise ResourceLimitError(f"{c.n_qubits} qubits exceed statevector limit {limit}")
    psi = zero_state(c.n_qubits)
    for g in c.gates:
        _apply_gate_inplace(psi, g)
    return psi


def fidelity_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2; invariant under global phase."""
    if a.shape != b.shape:
        raise ValueError("statevector dimensions differ")
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing + thermal relaxation parameters. Times in microseconds."""
    p1: float = 0.001
    p2: float = 0.01
    p_meas: float = 0.02
    t1: float = 50.0
    t2: float = 70.0
    t_1q: float = 0.05
    t_2q: float = 0.3

    def __post_init__(self):
        for name in ("p1", "p2", "p_meas"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("T1 and T2 must be positive")
        if self.t2 > 2.0 * self.t1 + 1e-12:
            raise ValueError("T2 must not exceed 2*T1")
        if self.t_1q <= 0 or self.t_2q <= 0:
            raise ValueError("gate durations must be positive")


def depolarizing_kraus(p: float) -> list[np.ndarray]:
    k0 = math.sqrt(1.0 - p) * _I2
    s = math.sqrt(p / 3.0)
    return [k0, s * _X, s * _Y, s * _Z]


def thermal_relaxation_kraus(t: float, t1: float, t2: float) -> list[np.ndarray]:
    """Amplitude damping gamma = 1 - exp(-t/T1) composed with dephasing that
    brings the total coherence decay to exp(-t/T2)."""
    gamma = 1.0 - math.exp(-t / t1)
    lam = 1.0 - math.exp(-t / t2) / math.exp(-t / (2.0 * t1))
    pz = 0.5 * lam  # Z-flip probability of the residual dephasing channel
    a0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]], dtype=np.complex128)
    a1 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=np.complex128)
    kraus = [math.sqrt(1.0 - pz) * a0, math.sqrt(1.0 - pz) * a1]
    if pz > 0.0:
        kraus.append(math.sqrt(pz) * (_Z @ a0))
        kraus.append(math.sqrt(pz) * (_Z @ a1))
    return [k for k in kraus if np.any(k)]


def _conjugate_1q(flat: np.ndarray, k: np.ndarray, q: int, n: int) -> None:
    # flat is vec(rho), length 4**n: row bits live at positions n..2n-1.
    backend.apply_1q(flat, np.ascontiguousarray(k), q + n)
    backend.apply_1q(flat, np.ascontiguousarray(k.conj()), q)


def _conjugate_2q(flat: np.ndarray, u: np.ndarray, qa: int, qb: int, n: int) -> None:
    backend.apply_2q(flat, np.ascontiguousarray(u), qa + n, qb + n)
    backend.apply_2q(flat, np.ascontiguousarray(u.conj()), qa, qb)


def _channel_1q(flat: np.ndarray, kraus: list[np.ndarray], q: int, n: int) -> np.ndarray:
    acc = np.zeros_like(flat)
    for k in kraus:
        tmp = flat.copy()
        _conjugate_1q(tmp, k, q, n)
        acc += tmp
    return acc


def run_noisy(c: Circuit, nm: NoiseModel, limit: int = DENSITY_LIMIT) -> np.ndarray:
    """Density matrix after the circuit under the gate-error noise model.

    Per gate: unitary conjugation, then per touched qubit a depolarizing
    channel (p1 or p2) followed by thermal relaxation over the gate
    duration (t_1q or t_2q)."""
    if c.n_qubits > limit:
        raise ResourceLimitError(f"{c.n_qubits} qubits exceed density-matrix limit {limit}")
    n = c.n_qubits
    rho = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    rho[0, 0] = 1.0
    flat = rho.reshape(-1)
    for g in c.gates:
        u = gate_matrix(g)
        if len(g.qubits) == 1:
            _conjugate_1q(flat, u, g.qubits[0], n)
            p, t = nm.p1, nm.t_1q
        else:
            _conjugate_2q(flat, u, g.qubits[0], g.qubits[1], n)
            p, t = nm.p2, nm.t_2q
        depol = depolarizing_kraus(p) if p > 0.0 else None
        thermal = thermal_relaxation_kraus(t, nm.t1, nm.t2)
        trivial_thermal = len(thermal) == 1 and np.allclose(thermal[0], _I2)
        for q in g.qubits:
            if depol is not None:
                flat[:] = _channel_1q(flat, depol, q, n)
            if not trivial_thermal:
                flat[:] = _channel_1q(flat, thermal, q, n)
    return flat.reshape(1 << n, 1 << n)


def density_from_state(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def reduced_density(state, keep) -> np.ndarray:
    """Partial trace onto `keep` (a nonempty proper subset of qubits).

    Accepts a statevector or a density matrix. The reduced matrix keeps the
    LSB convention: the smallest kept qubit is the least-significant bit."""
    keep = sorted(set(keep))
    state = np.asarray(state)
    if state.ndim == 1:
        n = state.size.bit_length() - 1
    else:
        n = state.shape[0].bit_length() - 1
    if not keep or len(keep) >= n:
        raise ValueError("keep must be a nonempty proper subset of qubits")
    if any(q < 0 or q >= n for q in keep):
        raise ValueError("keep contains out-of-range qubits")
    axes_keep = [n - 1 - q for q in reversed(keep)]  # MSB-first axes of kept qubits
    if state.ndim == 1:
        t = state.reshape([2] * n)
        traced = [ax for ax in range(n) if ax not in axes_keep]
        rho = np.tensordot(t, t.conj(), axes=(traced, traced))
        k = len(keep)
        return rho.reshape(1 << k, 1 << k)
    # Density-matrix input: einsum with matched letters on traced row/col bits.
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for ax in range(n):
        if ax not in axes_keep:
            col[ax] = row[ax]
    out = "".join(row[ax] for ax in axes_keep) + "".join(col[ax] for ax in axes_keep)
    sub = "".join(row) + "".join(col) + "->" + out
    k = len(keep)
    return np.einsum(sub, state.reshape([2] * (2 * n))).reshape(1 << k, 1 << k)


def sample_counts(psi: np.ndarray, shots: int, rng: np.random.Generator, p_meas: float = 0.0) -> dict[str, int]:
    """Minimal shot sampler with independent per-bit readout flips."""
    n = psi.size.bit_length() - 1
    probs = np.abs(psi) ** 2
    probs = probs / probs.sum()
    outcomes = rng.choice(psi.size, size=shots, p=probs)
    if p_meas > 0.0:
        flips = rng.random((shots, n)) < p_meas
        for j in range(n):
            outcomes = np.where(flips[:, j], outcomes ^ (1 << j), outcomes)
    counts: dict[str, int] = {}
    for v in outcomes:
        key = format(int(v), f"0{n}b")
        counts[key] = counts.get(key, 0) + 1
    return counts
