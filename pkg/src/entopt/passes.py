"""Deterministic circuit rewriting.

Peephole simplification (cancellation, rotation fusion, commutation
normalization) iterated to a fixed point, entanglement injection/boosting
transforms, and the pass-portfolio selector. Simplification never increases
gate count or depth and preserves the statevector up to global phase.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import backend
from .circuit import (
    CapacityError,
    Circuit,
    Gate,
    GateKind,
    canonical_angle,
    cx,
    depth,
    h,
    layers,
)
from .metrics import (
    MetricsRecord,
    entropy,
    evaluate_circuit,
    layer_entropies,
    qubit_entropies,
)
from .simulator import STATEVECTOR_LIMIT, fidelity_up_to_phase, gate_matrix, run

_SELF_INVERSE = frozenset({GateKind.H, GateKind.CX, GateKind.CZ, GateKind.SWAP})
_SYMMETRIC = frozenset({GateKind.CZ, GateKind.SWAP})
_ROTATIONS = frozenset({GateKind.RX, GateKind.RZ, GateKind.CRX})
_ANGLE_EPS = 1e-12


@dataclass(frozen=True)
class PassReport:
    pass_name: str
    gates_before: int
    gates_after: int
    depth_before: int
    depth_after: int
    fidelity_check: float | None = None


@dataclass(frozen=True)
class RewriteRule:
    """One sound rewrite, described by exemplar before/after gate pairs.

    `exemplars(theta, phi)` returns (lhs_gates, rhs_gates) tuples over at
    most 3 qubits; every rule is statevector-verified exhaustively in the
    test suite."""
    name: str
    exemplars: Callable[[float, float], list[tuple[tuple[Gate, ...], tuple[Gate, ...]]]]


def _cancel_exemplars(make) -> Callable:
    return lambda theta, phi: [((make(0, 1), make(0, 1)), ())]


REWRITE_RULES: tuple[RewriteRule, ...] = (
    RewriteRule("cancel-hh", lambda t, p: [((h(0), h(0)), ())]),
    RewriteRule("cancel-cxcx", _cancel_exemplars(cx)),
    RewriteRule("cancel-czcz", lambda t, p: [((Gate(GateKind.CZ, (0, 1)), Gate(GateKind.CZ, (1, 0))), ())]),
    RewriteRule(
        "cancel-swapswap",
        lambda t, p: [((Gate(GateKind.SWAP, (0, 1)), Gate(GateKind.SWAP, (1, 0))), ())],
    ),
    RewriteRule(
        "merge-rx",
        lambda t, p: [((Gate(GateKind.RX, (0,), t), Gate(GateKind.RX, (0,), p)), (Gate(GateKind.RX, (0,), t + p),))],
    ),
    RewriteRule(
        "merge-rz",
        lambda t, p: [((Gate(GateKind.RZ, (0,), t), Gate(GateKind.RZ, (0,), p)), (Gate(GateKind.RZ, (0,), t + p),))],
    ),
    RewriteRule(
        "merge-crx",  # sound only while the raw angle sum stays below 2*pi
        lambda t, p: [
            ((Gate(GateKind.CRX, (0, 1), t / 2), Gate(GateKind.CRX, (0, 1), p / 2)),
             (Gate(GateKind.CRX, (0, 1), t / 2 + p / 2),))
        ],
    ),
    RewriteRule(
        "commute-rz-past-cx-control",
        lambda t, p: [((Gate(GateKind.CX, (0, 1)), Gate(GateKind.RZ, (0,), t)), (Gate(GateKind.RZ, (0,), t), Gate(GateKind.CX, (0, 1))))],
    ),
    RewriteRule(
        "commute-rz-past-crx-control",
        lambda t, p: [((Gate(GateKind.CRX, (0, 1), p), Gate(GateKind.RZ, (0,), t)), (Gate(GateKind.RZ, (0,), t), Gate(GateKind.CRX, (0, 1), p)))],
    ),
    RewriteRule(
        "commute-rz-past-cz",
        lambda t, p: [
            ((Gate(GateKind.CZ, (0, 1)), Gate(GateKind.RZ, (q,), t)), (Gate(GateKind.RZ, (q,), t), Gate(GateKind.CZ, (0, 1))))
            for q in (0, 1)
        ],
    ),
    RewriteRule(
        "commute-rx-past-cx-target",
        lambda t, p: [((Gate(GateKind.CX, (0, 1)), Gate(GateKind.RX, (1,), t)), (Gate(GateKind.RX, (1,), t), Gate(GateKind.CX, (0, 1))))],
    ),
)


def _next_touching(gates: Sequence[Gate], i: int, qubits) -> int | None:
    """First index j > i whose gate touches any of `qubits`."""
    qs = set(qubits)
    for j in range(i + 1, len(gates)):
        if qs.intersection(gates[j].qubits):
            return j
    return None


def _prev_on_qubit(gates: Sequence[Gate], i: int, q: int) -> int | None:
    for j in range(i - 1, -1, -1):
        if gates[j].touches(q):
            return j
    return None


def _qubits_match(a: Gate, b: Gate) -> bool:
    if a.kind in _SYMMETRIC:
        return set(a.qubits) == set(b.qubits)
    return a.qubits == b.qubits


def cancel_inverse_pairs(c: Circuit) -> Circuit:
    """Drop adjacent self-inverse pairs (H, CX, CZ, SWAP) to a fixed point."""
    gates = list(c.gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(gates):
            if g.kind not in _SELF_INVERSE:
                continue
            j = _next_touching(gates, i, g.qubits)
            if j is None:
                continue
            partner = gates[j]
            if partner.kind is g.kind and _qubits_match(g, partner):
                del gates[j]
                del gates[i]
                changed = True
                break
    return c.with_gates(gates)


def merge_rotations(c: Circuit) -> Circuit:
    """Fuse adjacent same-axis rotations (RX, RZ, CRX on identical wires).

    Bare rotations merge mod 2*pi (the leftover -1 is a global phase). A
    controlled rotation is 4*pi-periodic: the -1 of RX(theta+2*pi) sits under
    the control, so CRX pairs merge only when the angle sum stays below
    2*pi (or vanishes mod 4*pi)."""
    gates = list(c.gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(gates):
            if g.kind not in _ROTATIONS:
                continue
            j = _next_touching(gates, i, g.qubits)
            if j is None:
                continue
            partner = gates[j]
            if partner.kind is g.kind and partner.qubits == g.qubits:
                total = g.angle + partner.angle  # both stored in [0, 2*pi)
                if g.kind is GateKind.CRX:
                    if total < _ANGLE_EPS or total > 4.0 * np.pi - _ANGLE_EPS:
                        del gates[j]
                        del gates[i]
                    elif total < 2.0 * np.pi - _ANGLE_EPS:
                        del gates[j]
                        gates[i] = Gate(g.kind, g.qubits, total)
                    else:
                        continue  # residue is a conditional phase, not a CRX
                else:
                    angle = canonical_angle(total)
                    del gates[j]
                    if min(angle, 2.0 * np.pi - angle) < _ANGLE_EPS:
                        del gates[i]  # identity up to global phase
                    else:
                        gates[i] = Gate(g.kind, g.qubits, angle)
                changed = True
                break
    return c.with_gates(gates)


def _rule_commutes(rot: Gate, two: Gate) -> bool:
    # The sound ruleset: RZ passes a CX/CRX control and anything diagonal
    # (CZ); RX passes a CX target.
    q = rot.qubits[0]
    if rot.kind is GateKind.RZ:
        if two.kind is GateKind.CZ:
            return True
        return two.kind in (GateKind.CX, GateKind.CRX) and q == two.qubits[0]
    if rot.kind is GateKind.RX:
        return two.kind is GateKind.CX and q == two.qubits[1]
    return False


def commute_normalize(c: Circuit) -> Circuit:
    """Move 1-qubit rotations leftward past commuting 2-qubit gates.

    Leftmost-first scan to a fixed point; exposes cancellation and merge
    opportunities without changing semantics."""
    gates = list(c.gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(gates):
            if g.kind not in (GateKind.RX, GateKind.RZ):
                continue
            j = _prev_on_qubit(gates, i, g.qubits[0])
            if j is None:
                continue
            prev = gates[j]
            if prev.kind.n_qubits == 2 and _rule_commutes(g, prev):
                del gates[i]
                gates.insert(j, g)
                changed = True
                break
    return c.with_gates(gates)


def simplify(c: Circuit, verify: bool = True, max_iterations: int = 100) -> tuple[Circuit, PassReport]:
    """Fixed-point loop of commute -> merge -> cancel.

    Among the input and all iterates, returns the candidate with the fewest
    gates (then lowest depth, ties to the latest iterate) that does not
    exceed the input's gate count or depth; this keeps the pass monotone
    even when commutation alone would lengthen a dependency chain."""
    candidates = [c]
    cur = c
    for _ in range(max_iterations):
        nxt = cancel_inverse_pairs(merge_rotations(commute_normalize(cur)))
        if nxt == cur:
            break
        candidates.append(nxt)
        cur = nxt
    else:
        warnings.warn("simplify hit the fixed-point iteration cap", RuntimeWarning, stacklevel=2)

    g_in, d_in = len(c.gates), depth(c)
    best, best_key = c, (g_in, d_in)
    for cand in candidates:
        key = (len(cand.gates), depth(cand))
        if key[0] <= g_in and key[1] <= d_in and key <= best_key:
            best, best_key = cand, key

    fidelity = None
    if verify and c.n_qubits <= STATEVECTOR_LIMIT:
        fidelity = fidelity_up_to_phase(run(c), run(best))
    return best, PassReport("simplify", g_in, len(best.gates), d_in, depth(best), fidelity)


def inject_entanglement(c: Circuit, layer_index: int, qubit_pair: tuple[int, int]) -> Circuit:
    """Insert H(q_a) then CX(q_a, q_b) at the start of the given layer."""
    qa, qb = qubit_pair
    if qa == qb:
        raise ValueError("injection qubits must be distinct")
    lays = layers(c)
    if not 0 <= layer_index <= len(lays):
        raise ValueError(f"layer index {layer_index} invalid for depth {len(lays)}")
    if len(c.gates) + 2 > c.max_gates:
        raise CapacityError("injection would exceed max_gates")
    pos = len(c.gates) if layer_index == len(lays) else min(lays[layer_index])
    gates = c.gates[:pos] + (h(qa), cx(qa, qb)) + c.gates[pos:]
    return c.with_gates(gates)


def _default_boost_metrics(c: Circuit):
    psi = run(c)
    return entropy(psi), layer_entropies(c), qubit_entropies(psi)


def boost_entanglement(c: Circuit, threshold: float, metrics_fn: Callable | None = None) -> Circuit:
    """One threshold-gated injection into the weakest layer.

    metrics_fn(c) -> (current_entropy, layer_entropies, per_qubit_entropies);
    defaults to the noiseless statevector metrics."""
    if metrics_fn is None:
        metrics_fn = _default_boost_metrics
    ent, lay_ents, q_ents = metrics_fn(c)
    if ent >= threshold:
        return c
    weakest_layer = int(np.argmin(lay_ents)) if len(lay_ents) else 0
    j = int(np.argmin(q_ents))
    neighbors = [x for x in (j - 1, j + 1) if 0 <= x < c.n_qubits]
    partner = min(neighbors, key=lambda x: (q_ents[x], x))
    return inject_entanglement(c, weakest_layer, (j, partner))


def embedded_unitary(g: Gate, local_qubits: Sequence[int], k: int) -> np.ndarray:
    """Unitary of `g` on a k-qubit space with its qubits at `local_qubits`."""
    u = np.eye(1 << k, dtype=np.complex128)
    flat = u.reshape(-1)
    m = gate_matrix(g)
    if len(local_qubits) == 1:
        backend.apply_1q(flat, m, local_qubits[0] + k)
    else:
        backend.apply_2q(flat, m, local_qubits[0] + k, local_qubits[1] + k)
    return u


def gates_commute(a: Gate, b: Gate) -> bool:
    """Exact commutation check on the union of the two gates' qubits."""
    shared = set(a.qubits) & set(b.qubits)
    if not shared:
        return True
    union = sorted(set(a.qubits) | set(b.qubits))
    local = {q: i for i, q in enumerate(union)}
    k = len(union)
    ua = embedded_unitary(a, [local[q] for q in a.qubits], k)
    ub = embedded_unitary(b, [local[q] for q in b.qubits], k)
    return bool(np.allclose(ua @ ub, ub @ ua, atol=1e-12))


def _ratio_or_zero(before: int, after: int) -> float:
    return (before - after) / before if before > 0 else 0.0


def portfolio_score(base: MetricsRecord, out: MetricsRecord, weights: Sequence[float]) -> float:
    w1, w2, w3, w4 = weights
    return (
        w1 * (out.qfi_norm - base.qfi_norm)
        + w2 * _ratio_or_zero(base.depth, out.depth)
        + w3 * (out.entropy_norm - base.entropy_norm)
        + w4 * _ratio_or_zero(base.gates, out.gates)
    )


def portfolio_optimize(
    c: Circuit,
    pipelines: Sequence[tuple[str, Callable[[Circuit], Circuit]]],
    score_weights: Sequence[float] = (50.0, 30.0, 10.0, 10.0),
) -> tuple[Circuit, str]:
    """Run every pipeline on a copy of the input, keep the best-scoring output.

    Ties break toward fewest gates, then lowest depth, then pipeline order."""
    if not pipelines:
        raise ValueError("at least one pipeline is required")
    base = evaluate_circuit(c)
    best = None
    for order, (name, fn) in enumerate(pipelines):
        out = fn(c)
        score = portfolio_score(base, evaluate_circuit(out), score_weights)
        key = (-score, len(out.gates), depth(out), order)
        if best is None or key < best[0]:
            best = (key, out, name)
    return best[1], best[2]
