"""Benchmark: compiled Cython kernels vs the pure-NumPy fallback.

Times the four hot kernels on a range of qubit counts plus an end-to-end
random-circuit simulation, and prints a speedup table.

Run:  python3 benchmarks/bench_kernels.py [--repeats 7]
"""
import argparse
import math
import time

import numpy as np

from entopt.backend import available_backends
from entopt.circuit import Circuit, Gate, GateKind
from entopt.simulator import gate_matrix


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return (v / np.linalg.norm(v)).astype(np.complex128)


def random_circuit(rng, n, gates):
    kinds = list(GateKind)
    out = []
    for _ in range(gates):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind.n_qubits == 1:
            qubits = (int(rng.integers(n)),)
        else:
            a = int(rng.integers(n))
            b = int(rng.integers(n - 1))
            qubits = (a, b + 1 if b >= a else b)
        angle = float(rng.uniform(0, 2 * math.pi)) if kind.has_angle else None
        out.append(Gate(kind, qubits, angle))
    return Circuit(n, tuple(out), gates)


def best_of(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(mod, n, repeats, inner=200):
    rng = np.random.default_rng(0)
    psi = random_state(rng, n)
    u2 = np.ascontiguousarray(gate_matrix(Gate(GateKind.H, (0,))))
    u4 = np.ascontiguousarray(gate_matrix(Gate(GateKind.CX, (0, 1))))
    results = {}

    def run_1q():
        s = psi.copy()
        for _ in range(inner):
            mod.apply_1q(s, u2, n // 2)

    def run_2q():
        s = psi.copy()
        for _ in range(inner):
            mod.apply_2q(s, u4, 0, n - 1)

    results["apply_1q"] = best_of(run_1q, repeats) / inner
    results["apply_2q"] = best_of(run_2q, repeats) / inner
    results["marginals"] = best_of(lambda: mod.qubit_marginals(psi), repeats)
    results["zgen"] = best_of(lambda: mod.zgen_moments(psi), repeats)
    return results


def bench_simulation(mod, n, gates, repeats):
    from entopt import backend as B

    rng = np.random.default_rng(1)
    circ = random_circuit(rng, n, gates)
    mats = [np.ascontiguousarray(gate_matrix(g)) for g in circ.gates]

    def run_once():
        psi = np.zeros(1 << n, dtype=np.complex128)
        psi[0] = 1.0
        for g, u in zip(circ.gates, mats):
            if len(g.qubits) == 1:
                mod.apply_1q(psi, u, g.qubits[0])
            else:
                mod.apply_2q(psi, u, g.qubits[0], g.qubits[1])
        return psi

    return best_of(run_once, repeats)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    mods = available_backends()
    if "compiled" not in mods:
        print("compiled backend not built; showing python backend only")

    print(f"{'kernel':<12} {'n':>3} " + " ".join(f"{name:>12}" for name in mods) + ("   speedup" if len(mods) > 1 else ""))
    for n in (2, 4, 8, 12, 16):
        rows = {name: bench_backend(mod, n, args.repeats) for name, mod in mods.items()}
        for kernel in ("apply_1q", "apply_2q", "marginals", "zgen"):
            line = f"{kernel:<12} {n:>3} "
            line += " ".join(f"{rows[name][kernel] * 1e6:>10.2f}us" for name in mods)
            if len(mods) > 1:
                line += f"   {rows['python'][kernel] / rows['compiled'][kernel]:>6.1f}x"
            print(line)
        print()

    print("end-to-end 60-gate circuit simulation:")
    for n in (2, 5, 8, 12):
        times = {name: bench_simulation(mod, n, 60, args.repeats) for name, mod in mods.items()}
        line = f"{'simulate':<12} {n:>3} " + " ".join(f"{times[name] * 1e6:>10.2f}us" for name in mods)
        if len(mods) > 1:
            line += f"   {times['python'] / times['compiled']:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
