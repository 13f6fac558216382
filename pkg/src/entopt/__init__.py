"""entopt: entanglement-distribution optimization for quantum sensor circuits.

Exact statevector / density-matrix simulation, QFI and entanglement-entropy
metrics, deterministic simplification passes, and a double-DQN agent that
rewrites small circuits to maximize sensitivity at minimal depth and gate
count.
"""
from .circuit import Circuit, Gate, GateKind, parse_circuit, serialize_circuit

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "Gate",
    "GateKind",
    "parse_circuit",
    "serialize_circuit",
    "__version__",
]
