"""Command-line surface: train, optimize, metrics, report.

Configuration is a flat key-value JSON file mirroring the flag names;
explicit flags override file values, unknown keys are rejected. Exit codes:
0 success, 2 usage/input error, 3 resource limit.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agent import AgentConfig, greedy_rollout, load_agent, run_training, save_agent
from .circuit import CircuitError, circuit_to_dict, parse_circuit
from .env import EnvConfig
from .metrics import evaluate_circuit
from .passes import portfolio_optimize, simplify
from .simulator import (
    DENSITY_LIMIT,
    STATEVECTOR_LIMIT,
    NoiseModel,
    ResourceLimitError,
    run,
    sample_counts,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3

DEFAULTS: dict[str, object] = {
    "qubits": 2,
    "max_gates": None,
    "episodes": 1000,
    "seed": 0,
    "out": "runs/run",
    "noise": "off",
    "max_steps": 100,
    "single_dqn_target": False,
    "p1": 0.001,
    "p2": 0.01,
    "p_meas": 0.02,
    "t1": 50.0,
    "t2": 70.0,
    "t_1q": 0.05,
    "t_2q": 0.3,
    "circuit": None,
    "pipelines": "simplify",
    "agent": None,
    "run": None,
    "json": False,
    "shots": 0,
}

PIPELINE_NAMES = ("identity", "simplify", "agent", "agent+simplify")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path) -> tuple[list[str], list[list[float]]]:
    text = path.read_text().strip().splitlines()
    header = text[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in text[1:]]
    return header, rows


def _load_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CircuitError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CircuitError(f"config file is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise CircuitError("config file must hold a JSON object")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise CircuitError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _resolve(args: argparse.Namespace) -> dict:
    """Layer defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(_load_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["noise"] not in ("on", "off"):
        raise CircuitError(f"--noise must be 'on' or 'off', got {cfg['noise']!r}")
    return cfg


def _noise_model(cfg: dict) -> NoiseModel:
    return NoiseModel(
        p1=float(cfg["p1"]),
        p2=float(cfg["p2"]),
        p_meas=float(cfg["p_meas"]),
        t1=float(cfg["t1"]),
        t2=float(cfg["t2"]),
        t_1q=float(cfg["t_1q"]),
        t_2q=float(cfg["t_2q"]),
    )


def _check_limits(n_qubits: int, noise_on: bool) -> None:
    if n_qubits > STATEVECTOR_LIMIT:
        raise ResourceLimitError(f"{n_qubits} qubits exceed the statevector limit {STATEVECTOR_LIMIT}")
    if noise_on and n_qubits > DENSITY_LIMIT:
        raise ResourceLimitError(f"{n_qubits} qubits exceed the density-matrix limit {DENSITY_LIMIT}")


def _read_circuit(cfg: dict):
    path = cfg.get("circuit")
    if not path:
        raise CircuitError("--circuit is required")
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise CircuitError(f"circuit file not found: {path}") from None
    return parse_circuit(text)


# -- train --------------------------------------------------------------------


def cmd_train(cfg: dict) -> int:
    n = int(cfg["qubits"])
    noise_on = cfg["noise"] == "on"
    _check_limits(n, noise_on)
    env_config = EnvConfig(
        n_qubits=n,
        max_gates=int(cfg["max_gates"]) if cfg["max_gates"] is not None else None,
        max_steps=int(cfg["max_steps"]),
        noise=noise_on,
        noise_model=_noise_model(cfg),
        seed=int(cfg["seed"]),
    )
    agent_config = AgentConfig(seed=int(cfg["seed"]), double_dqn=not cfg["single_dqn_target"])
    net, logs = run_training(env_config, agent_config, episodes=int(cfg["episodes"]))

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    columns = [
        "episode", "total_reward", "steps", "qfi", "entropy", "qfi_peak", "entropy_peak",
        "depth", "gates", "acc_error",
        "qfi_initial", "entropy_initial", "depth_initial", "gates_initial",
        "depth_reduction", "gate_reduction", "epsilon", "lr",
    ]
    _write_csv(out / "episodes.csv", columns, [[row[c] for c in columns] for row in logs])
    _write_csv(
        out / "pareto.csv",
        ["episode", "qfi", "entropy", "depth_reduction", "gate_reduction"],
        [[row["episode"], row["qfi"], row["entropy"], row["depth_reduction"], row["gate_reduction"]] for row in logs],
    )
    save_agent(out / "agent.bin", net, env_config, agent_config)
    echo = {k: cfg[k] for k in (
        "qubits", "max_gates", "episodes", "seed", "out", "noise", "max_steps",
        "single_dqn_target", "p1", "p2", "p_meas", "t1", "t2", "t_1q", "t_2q",
    )}
    echo["max_gates"] = env_config.max_gates
    (out / "config.echo.json").write_text(json.dumps(echo, indent=2) + "\n")
    best = max(logs, key=lambda r: r["total_reward"]) if logs else None
    if best:
        print(
            f"trained {len(logs)} episodes; best episode {best['episode']}"
            f" reward={_fmt(best['total_reward'])} qfi={_fmt(best['qfi'])} entropy={_fmt(best['entropy'])}"
        )
    return EXIT_OK


# -- optimize -------------------------------------------------------------------


def _build_pipelines(names: list[str], cfg: dict, circuit) -> list[tuple[str, object]]:
    pipelines = []
    agent_net = None
    agent_env = None
    for name in names:
        if name not in PIPELINE_NAMES:
            raise CircuitError(f"unknown pipeline {name!r}; choose from {PIPELINE_NAMES}")
        if "agent" in name and agent_net is None:
            path = cfg.get("agent")
            if not path:
                raise CircuitError(f"pipeline {name!r} needs --agent FILE")
            try:
                agent_net, meta = load_agent(path)
            except FileNotFoundError:
                raise CircuitError(f"agent file not found: {path}") from None
            if meta["n_qubits"] != circuit.n_qubits:
                raise CircuitError(
                    f"agent was trained for {meta['n_qubits']} qubits, circuit has {circuit.n_qubits}"
                )
            agent_env = EnvConfig(
                n_qubits=meta["n_qubits"],
                max_gates=meta["max_gates"],
                seed=int(cfg["seed"]),
            )
        if name == "identity":
            pipelines.append((name, lambda c: c))
        elif name == "simplify":
            pipelines.append((name, lambda c: simplify(c)[0]))
        elif name == "agent":
            pipelines.append((name, lambda c, _n=agent_net, _e=agent_env: greedy_rollout(_n, _e, c)))
        else:  # agent+simplify
            pipelines.append(
                (name, lambda c, _n=agent_net, _e=agent_env: simplify(greedy_rollout(_n, _e, c))[0])
            )
    return pipelines


def cmd_optimize(cfg: dict) -> int:
    circuit = _read_circuit(cfg)
    _check_limits(circuit.n_qubits, cfg["noise"] == "on")
    names = [p.strip() for p in str(cfg["pipelines"]).split(",") if p.strip()]
    pipelines = _build_pipelines(names, cfg, circuit)
    best, chosen = portfolio_optimize(circuit, pipelines)

    nm = _noise_model(cfg)
    noisy = cfg["noise"] == "on"
    before = evaluate_circuit(circuit, nm, noisy=noisy)
    after = evaluate_circuit(best, nm, noisy=noisy)
    depth_r = (before.depth - after.depth) / before.depth if before.depth else 0.0
    gate_r = (before.gates - after.gates) / before.gates if before.gates else 0.0

    out = Path(cfg["out"]) if cfg["out"] != DEFAULTS["out"] else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "optimized.json").write_text(json.dumps(circuit_to_dict(best)) + "\n")
    rows = [
        ["qfi", before.qfi_norm, after.qfi_norm],
        ["entropy", before.entropy_norm, after.entropy_norm],
        ["depth", before.depth, after.depth],
        ["gates", before.gates, after.gates],
        ["acc_error", before.accumulated_error, after.accumulated_error],
        ["depth_ratio", 0.0, depth_r],
        ["gate_ratio", 0.0, gate_r],
    ]
    _write_csv(out / "before_after.csv", ["metric", "before", "after"], rows)
    table = [f"chosen pipeline: {chosen}"]
    table += [f"{name:>12}: {_fmt(b):>10} -> {_fmt(a):>10}" for name, b, a in rows]
    (out / "before_after.txt").write_text("\n".join(table) + "\n")
    if cfg["json"]:
        print(
            json.dumps(
                {
                    "chosen": chosen,
                    "before": {r[0]: r[1] for r in rows},
                    "after": {r[0]: r[2] for r in rows},
                }
            )
        )
    else:
        print("\n".join(table))
    return EXIT_OK


# -- metrics --------------------------------------------------------------------


def cmd_metrics(cfg: dict) -> int:
    circuit = _read_circuit(cfg)
    noisy = cfg["noise"] == "on"
    _check_limits(circuit.n_qubits, noisy)
    nm = _noise_model(cfg)
    record = evaluate_circuit(circuit, nm, noisy=False)
    payload = {
        "qfi": record.qfi_norm,
        "entropy": record.entropy_norm,
        "depth": record.depth,
        "gates": record.gates,
        "layer_entropies": [float(v) for v in record.layer_entropies],
    }
    if noisy:
        noisy_record = evaluate_circuit(circuit, nm, noisy=True)
        payload["entropy_noisy"] = noisy_record.entropy_norm
        payload["acc_error"] = record.accumulated_error
    shots = int(cfg["shots"]) if cfg["shots"] else 0
    if shots:
        rng = np.random.default_rng(int(cfg["seed"]))
        payload["counts"] = sample_counts(run(circuit), shots, rng, nm.p_meas if noisy else 0.0)
    if cfg["json"]:
        print(json.dumps(payload))
        return EXIT_OK
    line = (
        f"qfi={record.qfi_norm:.4f} entropy={record.entropy_norm:.4f}"
        f" depth={record.depth} gates={record.gates}"
        f" layer_entropies=[{', '.join(f'{v:.4f}' for v in record.layer_entropies)}]"
    )
    if noisy:
        line += f" entropy_noisy={payload['entropy_noisy']:.4f} acc_error={payload['acc_error']:.4f}"
    if shots:
        line += f" counts={payload['counts']}"
    print(line)
    return EXIT_OK


# -- report ---------------------------------------------------------------------


def cmd_report(cfg: dict) -> int:
    run_dir = Path(cfg["run"] or cfg["out"])
    episodes_path = run_dir / "episodes.csv"
    if not episodes_path.exists():
        raise CircuitError(f"no episodes.csv under {run_dir}")
    header, rows = _read_csv(episodes_path)
    col = {name: i for i, name in enumerate(header)}

    rewards = [r[col["total_reward"]] for r in rows]
    moving = [float(np.mean(rewards[max(0, i - 9) : i + 1])) for i in range(len(rewards))]
    _write_csv(
        run_dir / "reward_curve.csv",
        ["episode", "total_reward", "moving_avg_10"],
        [[int(r[col["episode"]]), r[col["total_reward"]], m] for r, m in zip(rows, moving)],
    )
    _write_csv(
        run_dir / "pareto.csv",
        ["episode", "qfi", "entropy", "depth_reduction", "gate_reduction"],
        [
            [int(r[col["episode"]]), r[col["qfi"]], r[col["entropy"]], r[col["depth_reduction"]], r[col["gate_reduction"]]]
            for r in rows
        ],
    )

    best = max(rows, key=lambda r: r[col["total_reward"]])
    summary = [
        "# Initial = reset-time baseline of the best-reward episode;",
        "# Final = that episode's end metrics; Max/Avg over all episodes.",
        f"episodes: {len(rows)}",
        f"best_episode: {int(best[col['episode']])}",
        f"initial_qfi: {_fmt(best[col['qfi_initial']])}",
        f"final_qfi: {_fmt(best[col['qfi']])}",
        f"initial_entropy: {_fmt(best[col['entropy_initial']])}",
        f"final_entropy: {_fmt(best[col['entropy']])}",
        f"max_depth_reduction_pct: {_fmt(100.0 * max(r[col['depth_reduction']] for r in rows))}",
        f"avg_depth_reduction_pct: {_fmt(100.0 * float(np.mean([r[col['depth_reduction']] for r in rows])))}",
        f"max_gates_reduction_pct: {_fmt(100.0 * max(r[col['gate_reduction']] for r in rows))}",
        f"avg_gates_reduction_pct: {_fmt(100.0 * float(np.mean([r[col['gate_reduction']] for r in rows])))}",
    ]
    (run_dir / "summary.txt").write_text("\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK


# -- argument wiring --------------------------------------------------------------


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--qubits", type=int)
    p.add_argument("--max-gates", dest="max_gates", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--noise", choices=("on", "off"))
    p.add_argument("--json", action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the circuit-rewriting agent")
    _add_shared(p_train)
    p_train.add_argument("--max-steps", dest="max_steps", type=int)
    p_train.add_argument("--single-dqn-target", dest="single_dqn_target", action="store_const", const=True, default=None)
    for flag in ("p1", "p2", "p_meas", "t1", "t2", "t_1q", "t_2q"):
        p_train.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=float)

    p_opt = sub.add_parser("optimize", help="one-shot portfolio optimization of a circuit file")
    _add_shared(p_opt)
    p_opt.add_argument("--circuit", help="circuit JSON file")
    p_opt.add_argument("--pipelines", help="comma list: identity,simplify,agent,agent+simplify")
    p_opt.add_argument("--agent", help="agent checkpoint from train")

    p_met = sub.add_parser("metrics", help="print metrics of a circuit file")
    _add_shared(p_met)
    p_met.add_argument("--circuit", help="circuit JSON file")
    p_met.add_argument("--shots", type=int, help="optional sampled measurement counts")

    p_rep = sub.add_parser("report", help="emit reward curve, pareto data, and summary for a run")
    _add_shared(p_rep)
    p_rep.add_argument("--run", help="run directory produced by train")
    return parser


COMMANDS = {
    "train": cmd_train,
    "optimize": cmd_optimize,
    "metrics": cmd_metrics,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except ResourceLimitError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (CircuitError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
