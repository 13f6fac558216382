"""Circuit IR: the seven-gate set, ASAP layering, JSON round-trip, and the
agent's state encoding.

Circuits are immutable after construction; every operation here is a pure
function, so values are safe to share across threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi

# Default gate budget per qubit count; other n fall back to 12*n.
DEFAULT_MAX_GATES = {2: 15, 3: 30, 5: 60, 8: 90, 10: 120}


class CircuitError(ValueError):
    """Malformed circuit document or gate construction."""


class CapacityError(CircuitError):
    """Operation would push a circuit past its max_gates budget."""


class GateKind(Enum):
    # Declaration order fixes the one-hot column order of the encoding.
    H = "h"
    RX = "rx"
    RZ = "rz"
    CX = "cx"
    CZ = "cz"
    SWAP = "swap"
    CRX = "crx"

    @property
    def n_qubits(self) -> int:
        return 1 if self in _ONE_QUBIT else 2

    @property
    def has_angle(self) -> bool:
        return self in _ANGLED


_ONE_QUBIT = frozenset({GateKind.H, GateKind.RX, GateKind.RZ})
_ANGLED = frozenset({GateKind.RX, GateKind.RZ, GateKind.CRX})
GATE_KINDS = tuple(GateKind)
_KIND_INDEX = {k: i for i, k in enumerate(GATE_KINDS)}
_KIND_BY_NAME = {k.value: k for k in GateKind}


def canonical_angle(theta: float) -> float:
    """Map an angle into [0, 2*pi). Guards the r == 2*pi rounding edge."""
    r = math.fmod(theta, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if len(self.qubits) != self.kind.n_qubits:
            raise CircuitError(f"{self.kind.value} takes {self.kind.n_qubits} qubit(s), got {self.qubits}")
        if len(self.qubits) == 2 and self.qubits[0] == self.qubits[1]:
            raise CircuitError(f"{self.kind.value} qubits must be distinct, got {self.qubits}")
        if self.kind.has_angle:
            if self.angle is None:
                raise CircuitError(f"{self.kind.value} requires an angle")
            object.__setattr__(self, "angle", canonical_angle(float(self.angle)))
        elif self.angle is not None:
            raise CircuitError(f"{self.kind.value} takes no angle")

    def touches(self, q: int) -> bool:
        return q in self.qubits


# Terse constructors, mainly for tests and fixtures.
def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def rx(q: int, theta: float) -> Gate:
    return Gate(GateKind.RX, (q,), theta)


def rz(q: int, theta: float) -> Gate:
    return Gate(GateKind.RZ, (q,), theta)


def cx(control: int, target: int) -> Gate:
    return Gate(GateKind.CX, (control, target))


def cz(a: int, b: int) -> Gate:
    return Gate(GateKind.CZ, (a, b))


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.SWAP, (a, b))


def crx(control: int, target: int, theta: float) -> Gate:
    return Gate(GateKind.CRX, (control, target), theta)


def default_max_gates(n_qubits: int) -> int:
    return DEFAULT_MAX_GATES.get(n_qubits, 12 * n_qubits)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    max_gates: int | None = None

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be positive, got {self.n_qubits}")
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.max_gates is None:
            object.__setattr__(self, "max_gates", default_max_gates(self.n_qubits))
        if self.max_gates < 1:
            raise CircuitError(f"max_gates must be positive, got {self.max_gates}")
        if len(self.gates) > self.max_gates:
            raise CapacityError(f"{len(self.gates)} gates exceed max_gates={self.max_gates}")
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"qubit {q} out of range for n={self.n_qubits}")

    def with_gates(self, gates) -> "Circuit":
        return Circuit(self.n_qubits, tuple(gates), self.max_gates)

    def __len__(self) -> int:
        return len(self.gates)


def layers(c: Circuit) -> list[set[int]]:
    """ASAP layering: gate i goes to the earliest layer after every earlier
    gate sharing a qubit. Returns disjoint index sets covering all gates."""
    out: list[set[int]] = []
    frontier = [0] * c.n_qubits  # earliest free layer per qubit
    for i, g in enumerate(c.gates):
        layer = max(frontier[q] for q in g.qubits)
        if layer == len(out):
            out.append(set())
        out[layer].add(i)
        for q in g.qubits:
            frontier[q] = layer + 1
    return out


def depth(c: Circuit) -> int:
    return len(layers(c))


def gate_count(c: Circuit) -> int:
    return len(c.gates)


@dataclass(frozen=True)
class EncodedState:
    """Hybrid observation: per-gate one-hot matrix (max_gates x row width)
    plus the length-4 global feature vector
    [avg_layer_entanglement, current_entanglement, normalized_depth, normalized_gate_count]."""
    gate_matrix: np.ndarray
    global_features: np.ndarray


def row_width(n_qubits: int) -> int:
    # 7 gate-kind one-hot + first/second qubit one-hots + (sin, cos) of the angle
    return 7 + 2 * n_qubits + 2


def encode_state(c: Circuit, avg_layer_ent: float, current_ent: float) -> EncodedState:
    if not (0.0 <= avg_layer_ent <= 1.0 and 0.0 <= current_ent <= 1.0):
        raise ValueError("entanglement features must lie in [0, 1]")
    if len(c.gates) > c.max_gates:
        raise CapacityError("circuit exceeds max_gates")
    n, m = c.n_qubits, c.max_gates
    mat = np.zeros((m, row_width(n)), dtype=np.float64)
    for i, g in enumerate(c.gates):
        mat[i, _KIND_INDEX[g.kind]] = 1.0
        mat[i, 7 + g.qubits[0]] = 1.0
        if len(g.qubits) == 2:
            mat[i, 7 + n + g.qubits[1]] = 1.0
        if g.angle is not None:
            mat[i, -2] = math.sin(g.angle)
            mat[i, -1] = math.cos(g.angle)
    glob = np.array(
        [avg_layer_ent, current_ent, depth(c) / m, len(c.gates) / m],
        dtype=np.float64,
    )
    return EncodedState(mat, glob)


def parse_circuit(text: str) -> Circuit:
    """Parse the circuit JSON document. Angles are canonicalized to [0, 2*pi)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CircuitError(f"malformed JSON: {e}") from e
    return circuit_from_dict(doc)


def circuit_from_dict(doc) -> Circuit:
    if not isinstance(doc, dict):
        raise CircuitError("circuit document must be a JSON object")
    try:
        n = int(doc["n_qubits"])
    except (KeyError, TypeError, ValueError):
        raise CircuitError("missing or invalid n_qubits") from None
    max_gates = doc.get("max_gates")
    if max_gates is not None:
        max_gates = int(max_gates)
    raw_gates = doc.get("gates", [])
    if not isinstance(raw_gates, list):
        raise CircuitError("gates must be a list")
    gates = []
    for entry in raw_gates:
        if not isinstance(entry, dict):
            raise CircuitError(f"gate entry must be an object: {entry!r}")
        name = entry.get("type")
        kind = _KIND_BY_NAME.get(str(name).lower() if name is not None else "")
        if kind is None:
            raise CircuitError(f"unknown gate kind: {name!r}")
        qubits = entry.get("qubits")
        if not isinstance(qubits, list) or not all(isinstance(q, int) for q in qubits):
            raise CircuitError(f"qubits must be a list of ints: {entry!r}")
        angle = entry.get("angle")
        gates.append(Gate(kind, tuple(qubits), angle))
    if max_gates is None:
        # Accept documents larger than the default budget.
        max_gates = max(default_max_gates(n), len(gates))
    return Circuit(n, tuple(gates), max_gates)


def serialize_circuit(c: Circuit) -> str:
    """Inverse of parse_circuit: parse(serialize(c)) == c."""
    return json.dumps(circuit_to_dict(c))


def circuit_to_dict(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        entry: dict = {"type": g.kind.value, "qubits": list(g.qubits)}
        if g.angle is not None:
            entry["angle"] = g.angle
        gates.append(entry)
    return {"n_qubits": c.n_qubits, "max_gates": c.max_gates, "gates": gates}
