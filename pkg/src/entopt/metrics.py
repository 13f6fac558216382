"""Sensitivity and complexity metrics.

QFI follows the collective-dephasing sensing protocol: the probe state is
|psi(theta)> = exp(-i*theta*G)|psi> with G = sum_j Z_j / 2, for which the
pure-state QFI reduces to 4*Var(G), normalized by the Heisenberg bound n^2.
Entanglement entropy is the mean single-qubit von Neumann entropy (log2),
so GHZ-like states score 1.0 at every n.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .circuit import Circuit, depth as circuit_depth, layers
from .simulator import NoiseModel, _apply_gate_inplace, reduced_density, run, run_noisy

_EIG_FLOOR = 1e-12


def _clamp_unit(value: float, tol: float = 1e-9) -> float:
    if not -tol <= value <= 1.0 + tol:
        raise ValueError(f"normalized metric {value} outside [0, 1] tolerance band")
    return min(max(value, 0.0), 1.0)


def qfi(psi: np.ndarray) -> float:
    """Normalized QFI 4*Var(G)/n^2 of the collective sensing protocol."""
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"statevector not normalized (|psi|^2 = {norm})")
    n = psi.size.bit_length() - 1
    m1, m2 = backend.zgen_moments(np.ascontiguousarray(psi, dtype=np.complex128))
    var = m2 - m1 * m1
    return _clamp_unit(4.0 * var / (n * n))


def qfi_finite_difference(psi: np.ndarray, theta: float = math.pi / 2.0, h: float = 1e-4) -> float:
    """Literal QFI via central differences of |psi(theta)> at the sensing angle.

    Cross-check path for the analytic 4*Var(G)/n^2 value; both are evaluated
    in the same normalization."""
    n = psi.size.bit_length() - 1
    w = backend.zgen_weights(n)

    def probe(t: float) -> np.ndarray:
        return np.exp(-1j * t * w) * psi

    d = (probe(theta + h) - probe(theta - h)) / (2.0 * h)
    center = probe(theta)
    q = 4.0 * (np.vdot(d, d).real - abs(np.vdot(d, center)) ** 2)
    return q / (n * n)


def _binary_entropy_from_marginal(rho2: np.ndarray) -> float:
    # Eigenvalues of a Hermitian 2x2 in closed form.
    p0 = rho2[0, 0].real
    p1 = rho2[1, 1].real
    mean = 0.5 * (p0 + p1)
    dev = math.sqrt(max(0.25 * (p0 - p1) ** 2 + abs(rho2[0, 1]) ** 2, 0.0))
    s = 0.0
    for lam in (mean + dev, mean - dev):
        if lam > _EIG_FLOOR:
            s -= lam * math.log2(lam)
    return s


def entropy(psi: np.ndarray) -> float:
    """Mean single-qubit von Neumann entropy of a pure state, in [0, 1]."""
    n = psi.size.bit_length() - 1
    if n < 2:
        raise ValueError("entanglement entropy needs at least 2 qubits")
    marg = backend.qubit_marginals(np.ascontiguousarray(psi, dtype=np.complex128))
    total = sum(_binary_entropy_from_marginal(marg[q]) for q in range(n))
    return _clamp_unit(total / n)


def entropy_noisy(rho: np.ndarray) -> float:
    """Mean single-qubit entropy of a density matrix.

    For mixed states this conflates classical mixing with entanglement
    (documented limitation; I/4 scores 1.0)."""
    n = rho.shape[0].bit_length() - 1
    total = 0.0
    for q in range(n):
        total += _binary_entropy_from_marginal(reduced_density(rho, {q}))
    return _clamp_unit(total / n)


def qubit_entropies(psi: np.ndarray) -> np.ndarray:
    """Per-qubit single-qubit entropies (used for injection targeting)."""
    n = psi.size.bit_length() - 1
    marg = backend.qubit_marginals(np.ascontiguousarray(psi, dtype=np.complex128))
    return np.array([_binary_entropy_from_marginal(marg[q]) for q in range(n)])


def layer_entropies(c: Circuit) -> np.ndarray:
    """entropy(run(prefix through layer k)) for each ASAP layer k."""
    lays = layers(c)
    if not lays:
        return np.zeros(0)
    psi = run(c.with_gates(()))  # |0...0>
    out = np.empty(len(lays))
    for k, layer in enumerate(lays):
        for i in sorted(layer):
            _apply_gate_inplace(psi, c.gates[i])
        out[k] = entropy(psi)
    return out


def depth_ratio(d_in: int, d_out: int) -> float:
    """(D_in - D_out) / D_in; 0 with a warning for the degenerate D_in = 0."""
    if d_in == 0:
        warnings.warn("depth_ratio with D_in = 0 is degenerate; returning 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return (d_in - d_out) / d_in


def gate_ratio(g_in: int, g_out: int) -> float:
    """(G_in - G_out) / G_in; 0 with a warning for the degenerate G_in = 0."""
    if g_in == 0:
        warnings.warn("gate_ratio with G_in = 0 is degenerate; returning 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return (g_in - g_out) / g_in


def accumulated_error(c: Circuit, nm: NoiseModel) -> float:
    """1 - prod(1 - p_gate): crude success-probability complement."""
    log_ok = 0.0
    for g in c.gates:
        p = nm.p1 if len(g.qubits) == 1 else nm.p2
        if p >= 1.0:
            return 1.0
        log_ok += math.log1p(-p)
    return _clamp_unit(1.0 - math.exp(log_ok))


@dataclass(frozen=True)
class MetricsRecord:
    qfi_norm: float
    entropy_norm: float
    depth: int
    gates: int
    layer_entropies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    accumulated_error: float = 0.0

    CSV_COLUMNS = ("qfi", "entropy", "depth", "gates", "acc_error")

    def csv_row(self) -> tuple:
        return (self.qfi_norm, self.entropy_norm, self.depth, self.gates, self.accumulated_error)


def evaluate_circuit(c: Circuit, nm: NoiseModel | None = None, noisy: bool = False) -> MetricsRecord:
    """Full metrics record for a circuit.

    QFI is always computed from the noiseless statevector (the sensing
    protocol is pure-state); entropy switches to the noisy density-matrix
    path when noisy=True."""
    if nm is None:
        nm = NoiseModel()
    psi = run(c)
    ent = entropy_noisy(run_noisy(c, nm)) if noisy else entropy(psi)
    return MetricsRecord(
        qfi_norm=qfi(psi),
        entropy_norm=ent,
        depth=circuit_depth(c),
        gates=len(c.gates),
        layer_entropies=layer_entropies(c),
        accumulated_error=accumulated_error(c, nm),
    )
