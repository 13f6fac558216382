"""Double deep Q-network over encoded circuits.

The network is hand-rolled NumPy: a single-head attention block over the
gate rows (softmax(Q K^T / sqrt(d_k)) V), mean-pooled and concatenated with
the global features, then two ReLU layers into linear Q-values. Gradients
are analytic (finite-difference checked in the tests); the optimizer is
Adam with a reduce-on-plateau learning-rate schedule.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from .circuit import Circuit, EncodedState, row_width
from .env import CircuitEnv, EnvConfig
from .passes import portfolio_score


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_decay: float = 0.999
    eps_min: float = 0.01
    batch_size: int = 64
    train_start: int = 64
    lr: float = 1e-3
    lr_min: float = 1e-5
    lr_factor: float = 0.5
    lr_patience: int = 20
    target_sync: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    buffer_capacity: int = 2000
    d_k: int = 16
    hidden: tuple[int, int] = (256, 128)
    double_dqn: bool = True
    seed: int = 0


class QNetwork:
    """Attention block + MLP; deterministic forward given parameters."""

    PARAM_NAMES = ("wq", "wk", "wv", "w1", "b1", "w2", "b2", "w3", "b3")

    def __init__(
        self,
        row_width: int,
        n_rows: int,
        n_actions: int,
        d_k: int = 16,
        hidden: tuple[int, int] = (256, 128),
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            rng = np.random.default_rng(0)
        self.row_width = row_width
        self.n_rows = n_rows
        self.n_actions = n_actions
        self.d_k = d_k
        self.hidden = tuple(hidden)
        in_dim = d_k + 4
        h1, h2 = self.hidden
        self.params: dict[str, np.ndarray] = {
            "wq": rng.normal(0.0, 1.0 / math.sqrt(row_width), (row_width, d_k)),
            "wk": rng.normal(0.0, 1.0 / math.sqrt(row_width), (row_width, d_k)),
            "wv": rng.normal(0.0, 1.0 / math.sqrt(row_width), (row_width, d_k)),
            "w1": rng.normal(0.0, math.sqrt(2.0 / in_dim), (in_dim, h1)),
            "b1": np.zeros(h1),
            "w2": rng.normal(0.0, math.sqrt(2.0 / h1), (h1, h2)),
            "b2": np.zeros(h2),
            "w3": rng.normal(0.0, math.sqrt(1.0 / h2), (h2, n_actions)),
            "b3": np.zeros(n_actions),
        }

    def forward_batch(self, rows: np.ndarray, glob: np.ndarray, need_cache: bool = False):
        """rows: (B, M, row_width), glob: (B, 4) -> Q-values (B, n_actions).

        Projections run as one flat GEMM over the fused [wq|wk|wv] matrix;
        the batch dim is folded wherever BLAS would otherwise loop tiny
        matrices."""
        p = self.params
        b, m, w = rows.shape
        d = self.d_k
        qkv = rows.reshape(b * m, w) @ np.concatenate([p["wq"], p["wk"], p["wv"]], axis=1)
        qkv = qkv.reshape(b, m, 3 * d)
        q_, k_, v_ = qkv[:, :, :d], qkv[:, :, d : 2 * d], qkv[:, :, 2 * d :]
        scores = q_ @ k_.transpose(0, 2, 1)
        scores *= 1.0 / math.sqrt(d)
        scores -= scores.max(axis=-1, keepdims=True)
        attw = np.exp(scores, out=scores)
        attw /= attw.sum(axis=-1, keepdims=True)
        att = attw @ v_
        pooled = att.mean(axis=1)
        z = np.concatenate([pooled, glob], axis=1)
        a1 = z @ p["w1"] + p["b1"]
        h1 = np.maximum(a1, 0.0)
        a2 = h1 @ p["w2"] + p["b2"]
        h2 = np.maximum(a2, 0.0)
        q = h2 @ p["w3"] + p["b3"]
        if not need_cache:
            return q
        cache = dict(rows=rows, q_=q_, k_=k_, v_=v_, attw=attw, z=z, a1=a1, h1=h1, a2=a2, h2=h2)
        return q, cache

    def backward(self, cache: dict, dq: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given dL/dQ; mirrors forward_batch."""
        p = self.params
        h2, h1, a2, a1, z = cache["h2"], cache["h1"], cache["a2"], cache["a1"], cache["z"]
        grads = {
            "w3": h2.T @ dq,
            "b3": dq.sum(axis=0),
        }
        dh2 = dq @ p["w3"].T
        da2 = dh2 * (a2 > 0.0)
        grads["w2"] = h1.T @ da2
        grads["b2"] = da2.sum(axis=0)
        dh1 = da2 @ p["w2"].T
        da1 = dh1 * (a1 > 0.0)
        grads["w1"] = z.T @ da1
        grads["b1"] = da1.sum(axis=0)
        dz = da1 @ p["w1"].T
        dpooled = dz[:, : self.d_k]
        m = cache["rows"].shape[1]
        datt = np.repeat(dpooled[:, None, :], m, axis=1) / m
        attw, v_, q_, k_ = cache["attw"], cache["v_"], cache["q_"], cache["k_"]
        dattw = datt @ v_.transpose(0, 2, 1)
        dv = attw.transpose(0, 2, 1) @ datt
        dscores = attw * (dattw - (dattw * attw).sum(axis=-1, keepdims=True))
        dscores *= 1.0 / math.sqrt(self.d_k)
        dq_ = dscores @ k_
        dk_ = dscores.transpose(0, 2, 1) @ q_
        rows = cache["rows"]
        flat = rows.reshape(-1, rows.shape[2]).T  # (row_width, B*M), single GEMM per projection
        grads["wq"] = flat @ dq_.reshape(-1, self.d_k)
        grads["wk"] = flat @ dk_.reshape(-1, self.d_k)
        grads["wv"] = flat @ np.ascontiguousarray(dv).reshape(-1, self.d_k)
        return grads

    def clone(self) -> "QNetwork":
        twin = QNetwork.__new__(QNetwork)
        twin.row_width = self.row_width
        twin.n_rows = self.n_rows
        twin.n_actions = self.n_actions
        twin.d_k = self.d_k
        twin.hidden = self.hidden
        twin.params = {k: v.copy() for k, v in self.params.items()}
        return twin

    def copy_from(self, other: "QNetwork") -> None:
        for k in self.params:
            self.params[k][...] = other.params[k]


def attention(rows: np.ndarray, wq: np.ndarray, wk: np.ndarray, wv: np.ndarray) -> np.ndarray:
    """Single-state attention block: softmax(Q K^T / sqrt(d_k)) V."""
    d_k = wq.shape[1]
    q = rows @ wq
    k = rows @ wk
    v = rows @ wv
    scores = q @ k.T / math.sqrt(d_k)
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    return (e / e.sum(axis=-1, keepdims=True)) @ v


def q_forward(net: QNetwork, state: EncodedState) -> np.ndarray:
    if state.gate_matrix.shape != (net.n_rows, net.row_width):
        raise ValueError(
            f"encoded state shape {state.gate_matrix.shape} does not match network "
            f"({net.n_rows}, {net.row_width})"
        )
    return net.forward_batch(state.gate_matrix[None], state.global_features[None])[0]


def select_action(net: QNetwork, state: EncodedState, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over Q-values; exact ties resolve to the lowest index."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(q_forward(net, state)))


class Transition(NamedTuple):
    rows: np.ndarray
    glob: np.ndarray
    action: int
    reward: float
    next_rows: np.ndarray
    next_glob: np.ndarray
    done: bool


class ReplayBuffer:
    """Ring buffer, oldest-first eviction, uniform sampling without replacement."""

    def __init__(self, capacity: int = 2000):
        self.capacity = capacity
        self._store: deque[Transition] = deque(maxlen=capacity)

    def push(self, t: Transition) -> None:
        self._store.append(t)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.choice(len(self._store), size=batch_size, replace=False)
        return [self._store[int(i)] for i in idx]

    def __len__(self) -> int:
        return len(self._store)


class Adam:
    def __init__(self, shapes: dict[str, tuple], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def train_step(
    main: QNetwork,
    target: QNetwork,
    optimizer: Adam,
    batch: list[Transition],
    gamma: float,
    double_dqn: bool = True,
) -> float:
    """One TD update on the taken actions; returns the batch MSE loss."""
    if not batch:
        raise ValueError("empty batch")
    rows = np.stack([t.rows for t in batch])
    glob = np.stack([t.glob for t in batch])
    actions = np.array([t.action for t in batch])
    rewards = np.array([t.reward for t in batch])
    next_rows = np.stack([t.next_rows for t in batch])
    next_glob = np.stack([t.next_glob for t in batch])
    live = 1.0 - np.array([t.done for t in batch], dtype=float)

    q_next_target = target.forward_batch(next_rows, next_glob)
    if double_dqn:
        a_star = np.argmax(main.forward_batch(next_rows, next_glob), axis=1)
        bootstrap = q_next_target[np.arange(len(batch)), a_star]
    else:
        bootstrap = q_next_target.max(axis=1)
    y = rewards + gamma * bootstrap * live

    q, cache = main.forward_batch(rows, glob, need_cache=True)
    idx = np.arange(len(batch))
    err = q[idx, actions] - y
    loss = float(np.mean(err**2))
    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * err / len(batch)
    optimizer.step(main.params, main.backward(cache, dq))
    return loss


def sync_target(main: QNetwork, target: QNetwork, step_counter: int, interval: int = 100) -> None:
    """Hard copy of main into target every `interval` training steps."""
    if interval > 0 and step_counter % interval == 0:
        target.copy_from(main)


class PlateauScheduler:
    """Halve the LR when the best mean-of-last-10 episode reward stalls."""

    def __init__(self, lr: float, factor: float = 0.5, patience: int = 20, floor: float = 1e-5):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.floor = floor
        self._rewards: list[float] = []
        self._best = -math.inf
        self._stale = 0

    def update(self, episode_reward: float) -> float:
        self._rewards.append(episode_reward)
        mean10 = float(np.mean(self._rewards[-10:]))
        if mean10 > self._best:
            self._best = mean10
            self._stale = 0
        else:
            self._stale += 1
            if self._stale >= self.patience:
                self.lr = max(self.lr * self.factor, self.floor)
                self._stale = 0
        return self.lr


class DDQNAgent:
    """Main/target networks, replay buffer, epsilon annealing, Adam."""

    def __init__(self, n_qubits: int, n_rows: int, n_actions: int, config: AgentConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.main = QNetwork(
            row_width(n_qubits), n_rows, n_actions, config.d_k, config.hidden, self.rng
        )
        self.target = self.main.clone()
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.optimizer = Adam(
            {k: v.shape for k, v in self.main.params.items()},
            config.lr,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_eps,
        )
        self.epsilon = config.eps_start
        self.train_steps = 0

    def act(self, state: EncodedState) -> int:
        a = select_action(self.main, state, self.epsilon, self.rng)
        self.epsilon = max(self.epsilon * self.config.eps_decay, self.config.eps_min)
        return a

    def observe(self, state: EncodedState, action: int, reward: float, next_state: EncodedState, done: bool) -> None:
        self.buffer.push(
            Transition(
                state.gate_matrix,
                state.global_features,
                action,
                reward,
                next_state.gate_matrix,
                next_state.global_features,
                done,
            )
        )

    def learn(self) -> float | None:
        cfg = self.config
        if len(self.buffer) < cfg.train_start:
            return None
        batch = self.buffer.sample(min(cfg.batch_size, len(self.buffer)), self.rng)
        loss = train_step(self.main, self.target, self.optimizer, batch, cfg.gamma, cfg.double_dqn)
        self.train_steps += 1
        sync_target(self.main, self.target, self.train_steps, cfg.target_sync)
        return loss


def run_training(
    env_config: EnvConfig,
    agent_config: AgentConfig,
    episodes: int = 1000,
    initial_circuit: Circuit | None = None,
):
    """Full training loop; returns (network, per-episode log rows).

    Deterministic given (env seed, agent seed). BLAS pools are pinned to one
    thread for the duration: the batch matrices are small enough that
    threading only adds dispatch overhead, and a fixed reduction order keeps
    replays bitwise-identical."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pure-python fallback environments
        from contextlib import nullcontext

        threadpool_limits = lambda limits: nullcontext()
    with threadpool_limits(limits=1):
        return _run_training_loop(env_config, agent_config, episodes, initial_circuit)


def _run_training_loop(env_config, agent_config, episodes, initial_circuit):
    env = CircuitEnv(env_config)
    agent = DDQNAgent(env_config.n_qubits, env_config.max_gates, env.action_space_size, agent_config)
    scheduler = PlateauScheduler(
        agent_config.lr, agent_config.lr_factor, agent_config.lr_patience, agent_config.lr_min
    )
    logs: list[dict] = []
    for ep in range(episodes):
        state = env.reset(initial_circuit)
        baseline = env.baseline
        total = 0.0
        steps = 0
        done = False
        peak_qfi, peak_entropy = baseline.qfi_norm, baseline.entropy_norm
        while not done:
            action = agent.act(state)
            outcome = env.step(action)
            # a step-budget cutoff is not a terminal state: keep bootstrapping
            terminal = outcome.done and not outcome.info.truncated
            agent.observe(state, action, outcome.reward, outcome.next_state, terminal)
            agent.learn()
            state = outcome.next_state
            total += outcome.reward
            steps += 1
            done = outcome.done
            peak_qfi = max(peak_qfi, outcome.info.metrics.qfi_norm)
            peak_entropy = max(peak_entropy, outcome.info.metrics.entropy_norm)
        final = outcome.info.metrics
        agent.optimizer.lr = scheduler.update(total)
        logs.append(
            {
                "episode": ep,
                "total_reward": float(total),
                "steps": steps,
                "qfi": float(final.qfi_norm),
                "entropy": float(final.entropy_norm),
                "qfi_peak": float(peak_qfi),
                "entropy_peak": float(peak_entropy),
                "depth": final.depth,
                "gates": final.gates,
                "acc_error": float(final.accumulated_error),
                "qfi_initial": float(baseline.qfi_norm),
                "entropy_initial": float(baseline.entropy_norm),
                "depth_initial": baseline.depth,
                "gates_initial": baseline.gates,
                "depth_reduction": float((baseline.depth - final.depth) / baseline.depth) if baseline.depth else 0.0,
                "gate_reduction": float((baseline.gates - final.gates) / baseline.gates) if baseline.gates else 0.0,
                "epsilon": float(agent.epsilon),
                "lr": float(agent.optimizer.lr),
            }
        )
    return agent.main, logs


def greedy_rollout(net: QNetwork, env_config: EnvConfig, circuit: Circuit, weights=None) -> Circuit:
    """Deterministic greedy episode from `circuit`; returns the best-scored
    circuit seen (multi-metric score against the rollout's baseline)."""
    env = CircuitEnv(replace(env_config, noise=False))
    state = env.reset(circuit)
    base = env.baseline
    if weights is None:
        weights = env_config.weights
    rng = np.random.default_rng(0)  # unused at epsilon = 0
    best_circuit, best_score = env.circuit, 0.0
    while not env.done:
        action = select_action(net, state, 0.0, rng)
        outcome = env.step(action)
        score = portfolio_score(base, outcome.info.metrics, weights)
        if score > best_score:
            best_circuit, best_score = env.circuit, score
        state = outcome.next_state
    return best_circuit


def save_agent(path, net: QNetwork, env_config: EnvConfig, agent_config: AgentConfig) -> None:
    """Versioned binary checkpoint: shapes, parameter arrays, config echo."""
    meta = {
        "format_version": 1,
        "row_width": net.row_width,
        "n_rows": net.n_rows,
        "n_actions": net.n_actions,
        "d_k": net.d_k,
        "hidden": list(net.hidden),
        "n_qubits": env_config.n_qubits,
        "max_gates": env_config.max_gates,
        "agent_config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(agent_config).items()},
    }
    arrays = {f"param_{k}": v for k, v in net.params.items()}
    with open(path, "wb") as f:
        np.savez(f, meta_json=np.array(json.dumps(meta)), **arrays)


def load_agent(path) -> tuple[QNetwork, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta_json"]))
        if meta.get("format_version") != 1:
            raise ValueError(f"unsupported agent file version: {meta.get('format_version')}")
        net = QNetwork(
            meta["row_width"],
            meta["n_rows"],
            meta["n_actions"],
            meta["d_k"],
            tuple(meta["hidden"]),
        )
        for k in net.params:
            net.params[k] = np.array(data[f"param_{k}"])
    return net, meta
