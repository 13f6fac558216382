"""The circuit-rewriting MDP.

Actions append/remove gates or trigger structural transforms; every step is
followed by simplification and a threshold-gated entanglement boost. The
reward is the weighted multi-metric delta (QFI, depth, entropy, gates) with
depth/gate deltas normalized by the episode's baselines.

Transitions are deterministic: randomness enters only through reset's
circuit generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import (
    CapacityError,
    Circuit,
    EncodedState,
    Gate,
    GateKind,
    default_max_gates,
    encode_state,
)
from .metrics import MetricsRecord, evaluate_circuit, qubit_entropies
from .passes import boost_entanglement, gates_commute, simplify
from .simulator import NoiseModel, run

CAPACITY_PENALTY = -10.0


def action_table(n_qubits: int) -> list[tuple[str, object]]:
    """Fixed integer-indexed action set: 3n one-qubit adds, 4(n-1)
    adjacent-pair two-qubit adds, n removes, swap/inject/boost, stop."""
    n = n_qubits
    acts: list[tuple[str, object]] = []
    for name in ("add_h", "add_rx", "add_rz"):
        acts += [(name, q) for q in range(n)]
    for name in ("add_cx", "add_cz", "add_swap", "add_crx"):
        acts += [(name, (q, q + 1)) for q in range(n - 1)]
    acts += [("remove", q) for q in range(n)]
    acts += [("swap_commuting", None), ("inject", None), ("boost", None), ("stop", None)]
    return acts


def action_space_size(n_qubits: int) -> int:
    return 8 * n_qubits


_ADD_KIND = {
    "add_h": GateKind.H,
    "add_rx": GateKind.RX,
    "add_rz": GateKind.RZ,
    "add_cx": GateKind.CX,
    "add_cz": GateKind.CZ,
    "add_swap": GateKind.SWAP,
    "add_crx": GateKind.CRX,
}


@dataclass(frozen=True)
class EnvConfig:
    n_qubits: int
    max_gates: int | None = None
    max_steps: int = 100
    weights: tuple[float, float, float, float] = (50.0, 30.0, 10.0, 10.0)
    ent_threshold: float = 0.7
    threshold_bounds: tuple[float, float] = (0.5, 0.9)
    ema_decay: float = 0.99
    patience: int = 50
    entropy_tol: float = 1e-3
    stable_window: int = 10
    noise: bool = False
    noise_model: NoiseModel = field(default_factory=NoiseModel)
    error_penalty_weight: float = 0.0
    rotation_angle: float = math.pi / 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("environment needs at least 2 qubits")
        if self.max_gates is None:
            object.__setattr__(self, "max_gates", default_max_gates(self.n_qubits))


@dataclass(frozen=True)
class StepInfo:
    metrics: MetricsRecord
    boosted: bool = False
    injected: bool = False
    simplified_gates_removed: int = 0
    truncated: bool = False  # done solely by the step budget, not a terminal state


@dataclass(frozen=True)
class StepOutcome:
    next_state: EncodedState
    reward: float
    done: bool
    info: StepInfo


@dataclass(frozen=True)
class _HistoryEntry:
    reward: float
    entropy: float
    gates: tuple[Gate, ...]


def reward_delta(
    prev: MetricsRecord,
    cur: MetricsRecord,
    weights,
    d_in: int,
    g_in: int,
    error_weight: float = 0.0,
) -> float:
    """Eq.-style weighted sum of metric deltas; depth/gate deltas are
    normalized by the episode baselines (degenerate baselines contribute 0)."""
    w1, w2, w3, w4 = weights
    r = w1 * (cur.qfi_norm - prev.qfi_norm)
    r += w2 * ((prev.depth - cur.depth) / d_in if d_in > 0 else 0.0)
    r += w3 * (cur.entropy_norm - prev.entropy_norm)
    r += w4 * ((prev.gates - cur.gates) / g_in if g_in > 0 else 0.0)
    if error_weight:
        r -= error_weight * (cur.accumulated_error - prev.accumulated_error)
    return r


def adapt_threshold(ema: float, entropy_value: float, decay: float = 0.99, bounds=(0.5, 0.9)) -> tuple[float, float]:
    """EMA update of the adaptive entanglement threshold.

    Returns (new_ema, new_threshold) with threshold = clamp(0.9 * ema)."""
    ema = decay * ema + (1.0 - decay) * entropy_value
    return ema, min(max(0.9 * ema, bounds[0]), bounds[1])


def check_convergence(history, patience: int = 50, entropy_tol: float = 1e-3, window: int = 10) -> bool:
    """True iff the best reward stagnated for `patience` steps AND entropy
    moved < entropy_tol over `window` steps AND the gate list is frozen."""
    if len(history) < max(patience + 1, window + 1):
        return False
    best = -math.inf
    last_improve = 0
    for i, rec in enumerate(history):
        if rec.reward > best:
            best = rec.reward
            last_improve = i
    if len(history) - 1 - last_improve < patience:
        return False
    if abs(history[-1].entropy - history[-1 - window].entropy) >= entropy_tol:
        return False
    tail = history[-window:]
    return all(t.gates == tail[0].gates for t in tail)


def random_circuit(n_qubits: int, max_gates: int, rng: np.random.Generator) -> Circuit:
    """Seeded initial circuit: gate count uniform in [M/4, M/2], kinds
    uniform over the gate set, uniform valid qubits, angles in [0, 2*pi)."""
    count = int(rng.integers(max_gates // 4, max_gates // 2, endpoint=True))
    kinds = list(GateKind)
    gates = []
    for _ in range(count):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind.n_qubits == 1:
            qubits = (int(rng.integers(n_qubits)),)
        else:
            a = int(rng.integers(n_qubits))
            b = int(rng.integers(n_qubits - 1))
            if b >= a:
                b += 1
            qubits = (a, b)
        angle = float(rng.uniform(0.0, 2.0 * math.pi)) if kind.has_angle else None
        gates.append(Gate(kind, qubits, angle))
    return Circuit(n_qubits, tuple(gates), max_gates)


class CircuitEnv:
    """Single-threaded mutable episode state; one instance per worker."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.actions = action_table(config.n_qubits)
        self.action_space_size = len(self.actions)
        self._rng = np.random.default_rng(config.seed)
        self._circuit: Circuit | None = None
        self._done = True

    # -- episode bookkeeping -------------------------------------------------

    @property
    def circuit(self) -> Circuit:
        return self._circuit

    @property
    def done(self) -> bool:
        return self._done

    @property
    def threshold(self) -> float:
        return self._theta

    @property
    def baseline(self) -> MetricsRecord:
        return self._baseline

    def _evaluate(self, c: Circuit) -> tuple[MetricsRecord, np.ndarray]:
        record = evaluate_circuit(c, self.config.noise_model, noisy=self.config.noise)
        q_ents = qubit_entropies(run(c))
        return record, q_ents

    def _encode(self, c: Circuit, record: MetricsRecord) -> EncodedState:
        avg_layer = float(np.mean(record.layer_entropies)) if len(record.layer_entropies) else 0.0
        return encode_state(c, avg_layer, record.entropy_norm)

    def reset(self, initial: Circuit | None = None) -> EncodedState:
        cfg = self.config
        if initial is not None:
            if initial.n_qubits != cfg.n_qubits:
                raise ValueError(
                    f"initial circuit has {initial.n_qubits} qubits, config expects {cfg.n_qubits}"
                )
            circuit = Circuit(cfg.n_qubits, initial.gates, cfg.max_gates)
        else:
            circuit = random_circuit(cfg.n_qubits, cfg.max_gates, self._rng)
        self._circuit = circuit
        self._record, self._q_ents = self._evaluate(circuit)
        self._baseline = self._record
        self._theta = cfg.ent_threshold
        self._ema = cfg.ent_threshold / 0.9  # so clamp(0.9*EMA) starts at the configured threshold
        self._history: list[_HistoryEntry] = []
        self._steps = 0
        self._done = False
        return self._encode(circuit, self._record)

    # -- transition ----------------------------------------------------------

    def _apply_action(self, kind: str, arg, c: Circuit) -> tuple[Circuit, bool]:
        """Returns (circuit, injected). Raises CapacityError on overfull adds."""
        if kind in _ADD_KIND:
            gk = _ADD_KIND[kind]
            angle = self.config.rotation_angle if gk.has_angle else None
            qubits = (arg,) if gk.n_qubits == 1 else tuple(arg)
            return c.with_gates(c.gates + (Gate(gk, qubits, angle),)), False
        if kind == "remove":
            for i in range(len(c.gates) - 1, -1, -1):
                if c.gates[i].touches(arg):
                    return c.with_gates(c.gates[:i] + c.gates[i + 1 :]), False
            return c, False
        if kind == "swap_commuting":
            for i in range(len(c.gates) - 1):
                a, b = c.gates[i], c.gates[i + 1]
                if set(a.qubits) & set(b.qubits) and gates_commute(a, b):
                    gates = list(c.gates)
                    gates[i], gates[i + 1] = b, a
                    return c.with_gates(gates), False
            return c, False
        if kind == "inject":
            injected = boost_entanglement(c, math.inf, self._cached_boost_metrics)
            return injected, True
        if kind == "boost":
            boosted = boost_entanglement(c, self._theta, self._cached_boost_metrics)
            return boosted, False
        raise AssertionError(f"unhandled action {kind}")

    def _cached_boost_metrics(self, _c: Circuit):
        return self._record.entropy_norm, self._record.layer_entropies, self._q_ents

    def step(self, action_index: int) -> StepOutcome:
        if self._done:
            raise RuntimeError("episode is done; call reset() first")
        cfg = self.config
        kind, arg = self.actions[action_index]
        self._steps += 1

        if kind == "stop":
            self._done = True
            self._history.append(_HistoryEntry(0.0, self._record.entropy_norm, self._circuit.gates))
            return StepOutcome(self._encode(self._circuit, self._record), 0.0, True, StepInfo(self._record))

        try:
            c, injected = self._apply_action(kind, arg, self._circuit)
        except CapacityError:
            self._done = True
            self._history.append(_HistoryEntry(CAPACITY_PENALTY, self._record.entropy_norm, self._circuit.gates))
            return StepOutcome(
                self._encode(self._circuit, self._record),
                CAPACITY_PENALTY,
                True,
                StepInfo(self._record),
            )

        gates_before = len(c.gates)
        c, _report = simplify(c, verify=False)
        removed = gates_before - len(c.gates)

        record, q_ents = self._evaluate(c)
        boosted = False
        if record.entropy_norm < self._theta and len(c.gates) + 2 <= c.max_gates:
            fn = lambda _c: (record.entropy_norm, record.layer_entropies, q_ents)
            c_boost = boost_entanglement(c, self._theta, fn)
            if c_boost is not c:
                c = c_boost
                record, q_ents = self._evaluate(c)
                boosted = True

        self._ema, self._theta = adapt_threshold(
            self._ema, record.entropy_norm, cfg.ema_decay, cfg.threshold_bounds
        )
        reward = reward_delta(
            self._record,
            record,
            cfg.weights,
            self._baseline.depth,
            self._baseline.gates,
            cfg.error_penalty_weight,
        )

        self._circuit = c
        self._record = record
        self._q_ents = q_ents
        self._history.append(_HistoryEntry(reward, record.entropy_norm, c.gates))

        converged = check_convergence(self._history, cfg.patience, cfg.entropy_tol, cfg.stable_window)
        out_of_steps = self._steps >= cfg.max_steps
        done = converged or out_of_steps
        self._done = done

        return StepOutcome(
            self._encode(c, record),
            reward,
            done,
            StepInfo(
                record,
                boosted=boosted,
                injected=injected,
                simplified_gates_removed=removed,
                truncated=out_of_steps and not converged,
            ),
        )
