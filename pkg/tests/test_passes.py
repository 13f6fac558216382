"""Rewrite passes: soundness by simulation, monotonicity, idempotence."""
import math

import numpy as np
import pytest

from entopt.circuit import CapacityError, Circuit, cx, cz, crx, depth, h, rx, rz, swap
from entopt.metrics import entropy
from entopt.passes import (
    PassReport,
    boost_entanglement,
    cancel_inverse_pairs,
    commute_normalize,
    gates_commute,
    inject_entanglement,
    merge_rotations,
    portfolio_optimize,
    simplify,
)
from entopt.simulator import fidelity_up_to_phase, run
from conftest import random_test_circuit


def equivalent(a: Circuit, b: Circuit) -> bool:
    return fidelity_up_to_phase(run(a), run(b)) > 1 - 1e-9


class TestCancel:
    def test_adjacent_hh(self):
        assert cancel_inverse_pairs(Circuit(1, (h(0), h(0)), 5)).gates == ()

    def test_non_blocking_other_qubit(self):
        c = Circuit(2, (h(0), h(1), h(0)), 5)
        out = cancel_inverse_pairs(c)
        assert out.gates == (h(1),)
        assert equivalent(c, out)

    def test_blocked_by_shared_qubit(self):
        c = Circuit(2, (cx(0, 1), h(1), cx(0, 1)), 5)
        assert cancel_inverse_pairs(c).gates == c.gates

    def test_symmetric_gates_cancel_reversed(self):
        for make in (cz, swap):
            c = Circuit(2, (make(0, 1), make(1, 0)), 5)
            out = cancel_inverse_pairs(c)
            assert out.gates == ()
            assert equivalent(c, out)

    def test_cx_reversed_does_not_cancel(self):
        c = Circuit(2, (cx(0, 1), cx(1, 0)), 5)
        assert cancel_inverse_pairs(c).gates == c.gates


class TestMerge:
    def test_rx_addition(self):
        out = merge_rotations(Circuit(1, (rx(0, math.pi / 2), rx(0, math.pi / 2)), 5))
        assert len(out.gates) == 1
        assert out.gates[0].angle == pytest.approx(math.pi)

    def test_full_rotation_removed_up_to_phase(self):
        c = Circuit(1, (rx(0, math.pi), rx(0, math.pi)), 5)
        out = merge_rotations(c)
        assert out.gates == ()
        assert equivalent(c, out)  # RX(2*pi) = -I, global phase only

    def test_different_axes_untouched(self):
        c = Circuit(1, (rx(0, 0.3), rz(0, 0.4)), 5)
        assert merge_rotations(c).gates == c.gates

    def test_crx_requires_identical_wires(self):
        merged = merge_rotations(Circuit(2, (crx(0, 1, 0.5), crx(0, 1, 0.7)), 5))
        assert len(merged.gates) == 1 and merged.gates[0].angle == pytest.approx(1.2)
        kept = merge_rotations(Circuit(2, (crx(0, 1, 0.5), crx(1, 0, 0.7)), 5))
        assert len(kept.gates) == 2


class TestCommute:
    def test_rz_through_control(self):
        c = Circuit(2, (cx(0, 1), rz(0, 0.7)), 5)
        out = commute_normalize(c)
        assert [g.kind.value for g in out.gates] == ["rz", "cx"]
        assert equivalent(c, out)

    def test_rx_through_target(self):
        c = Circuit(2, (cx(0, 1), rx(1, 0.7)), 5)
        out = commute_normalize(c)
        assert [g.kind.value for g in out.gates] == ["rx", "cx"]
        assert equivalent(c, out)

    def test_rx_on_control_stays(self):
        c = Circuit(2, (cx(0, 1), rx(0, 0.7)), 5)
        assert commute_normalize(c).gates == c.gates
        # and moving it would change semantics
        moved = Circuit(2, (rx(0, 0.7), cx(0, 1)), 5)
        assert fidelity_up_to_phase(run(c), run(moved)) < 1 - 1e-6

    def test_rz_through_cz_either_side(self):
        for q in (0, 1):
            c = Circuit(2, (cz(0, 1), rz(q, 1.1)), 5)
            out = commute_normalize(c)
            assert out.gates[0].kind.value == "rz"
            assert equivalent(c, out)

    def test_ruleset_sound_exhaustive(self):
        # every registered RewriteRule, random angles, exhaustive qubit
        # placements on 2 and 3 qubits, magnitude-rich input states
        from entopt.circuit import Gate, crx as _crx
        from entopt.passes import REWRITE_RULES

        rng = np.random.default_rng(31)
        checked = 0
        for rule in REWRITE_RULES:
            for _ in range(10):
                theta = float(rng.uniform(0.1, 2 * math.pi - 0.1))
                phi = float(rng.uniform(0.1, 2 * math.pi - 0.1))
                for lhs, rhs in rule.exemplars(theta, phi):
                    for n, shift in ((2, 0), (3, 0), (3, 1)):
                        def place(g):
                            qs = tuple(q + shift for q in g.qubits)
                            return Gate(g.kind, qs, g.angle)

                        prep = tuple(h(q) for q in range(n)) + tuple(
                            _crx(q, q + 1, 0.9 + 0.2 * q) for q in range(n - 1)
                        )
                        a = Circuit(n, prep + tuple(place(g) for g in lhs), 16)
                        b = Circuit(n, prep + tuple(place(g) for g in rhs), 16)
                        assert fidelity_up_to_phase(run(a), run(b)) > 1 - 1e-10, rule.name
                        checked += 1
        assert checked >= 300


class TestSimplify:
    def test_double_cancellation(self):
        out, report = simplify(Circuit(2, (h(0), h(0), cx(0, 1), cx(0, 1)), 5))
        assert out.gates == ()
        assert report.gates_before == 4 and report.gates_after == 0
        assert report.fidelity_check == pytest.approx(1.0, abs=1e-9)

    def test_bell_already_minimal(self):
        bell = Circuit(2, (h(0), cx(0, 1)))
        out, _ = simplify(bell)
        assert out == bell

    def test_commute_exposes_merge_and_cancel(self):
        c = Circuit(2, (rz(0, 0.2), cx(0, 1), rz(0, 0.3), cx(0, 1)), 5)
        out, report = simplify(c)
        assert len(out.gates) == 1
        assert out.gates[0].kind.value == "rz"
        assert out.gates[0].angle == pytest.approx(0.5)
        assert report.fidelity_check == pytest.approx(1.0, abs=1e-9)

    def test_depth_never_increases_even_when_commute_would(self):
        # commuting RZ(0) leftward past CX would lengthen qubit 1's chain
        c = Circuit(2, (h(0), cx(0, 1), rz(0, 0.4), h(1)), 5)
        out, _ = simplify(c)
        assert depth(out) <= depth(c) and len(out.gates) <= len(c.gates)

    def test_random_circuits_sound_monotone_idempotent(self):
        rng = np.random.default_rng(32)
        for _ in range(150):
            n = int(rng.integers(2, 6))
            c = random_test_circuit(rng, n, int(rng.integers(0, 30)))
            out, report = simplify(c)
            assert report.fidelity_check > 1 - 1e-9
            assert len(out.gates) <= len(c.gates)
            assert depth(out) <= depth(c)
            again, _ = simplify(out)
            assert again == out

    def test_returns_pass_report(self):
        _, report = simplify(Circuit(2, (h(0),)))
        assert isinstance(report, PassReport)
        assert report.pass_name == "simplify"


class TestInject:
    def test_empty_circuit_becomes_bell(self):
        c = inject_entanglement(Circuit(2, (), 15), 0, (0, 1))
        assert [g.kind.value for g in c.gates] == ["h", "cx"]
        assert entropy(run(c)) == pytest.approx(1.0, abs=1e-12)

    def test_insert_increases_entropy(self):
        base = Circuit(2, (h(0),), 15)
        before = entropy(run(base))
        out = inject_entanglement(base, 1, (1, 0))
        assert entropy(run(out)) > before

    def test_capacity_error(self):
        full = Circuit(2, (h(0), h(1)), 2)
        with pytest.raises(CapacityError):
            inject_entanglement(full, 0, (0, 1))

    def test_invalid_layer(self):
        with pytest.raises(ValueError):
            inject_entanglement(Circuit(2, (h(0),), 15), 5, (0, 1))

    def test_gate_count_plus_two(self):
        base = Circuit(3, (h(0), cx(0, 1)), 30)
        out = inject_entanglement(base, 1, (2, 1))
        assert len(out.gates) == len(base.gates) + 2


class TestBoost:
    def test_above_threshold_unchanged(self):
        bell = Circuit(2, (h(0), cx(0, 1)), 15)
        assert boost_entanglement(bell, 0.7) is bell

    def test_low_entropy_gains_injection(self):
        c = Circuit(2, (h(0),), 15)
        out = boost_entanglement(c, 0.7)
        assert len(out.gates) == 3
        assert entropy(run(out)) > 0.0

    def test_zero_threshold_never_fires(self):
        for gates in ((), (h(0),), (rz(1, 0.3),)):
            c = Circuit(2, gates, 15)
            assert boost_entanglement(c, 0.0) is c

    def test_product_circuits_strictly_improve(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            n = int(rng.integers(2, 5))
            gates = tuple(
                rx(int(rng.integers(n)), float(rng.uniform(0, 2 * math.pi))) for _ in range(4)
            )
            c = Circuit(n, gates, 20)
            before = entropy(run(c))
            out = boost_entanglement(c, 0.99)
            if before < 0.99:
                assert entropy(run(out)) > before

    def test_capacity_error_propagates(self):
        c = Circuit(2, (h(0), h(1), rz(0, 0.1)), 3)
        with pytest.raises(CapacityError):
            boost_entanglement(c, 0.9)


class TestGatesCommute:
    def test_disjoint_commute(self):
        assert gates_commute(h(0), h(1))

    def test_rule_cases(self):
        assert gates_commute(rz(0, 0.3), cx(0, 1))
        assert not gates_commute(rx(0, 0.3), cx(0, 1))
        assert gates_commute(rx(1, 0.3), cx(0, 1))
        assert gates_commute(cz(0, 1), cz(1, 2))
        assert not gates_commute(cx(0, 1), cx(1, 2))

    def test_self_commute(self):
        assert gates_commute(cx(0, 1), cx(0, 1))


class TestPortfolio:
    def test_simplify_beats_identity(self):
        c = Circuit(2, (h(0), h(0)), 15)
        pipelines = [("identity", lambda x: x), ("simplify", lambda x: simplify(x)[0])]
        best, name = portfolio_optimize(c, pipelines)
        assert name == "simplify"
        assert best.gates == ()

    def test_single_pipeline_chosen(self):
        c = Circuit(2, (h(0), cx(0, 1)), 15)
        best, name = portfolio_optimize(c, [("simplify", lambda x: simplify(x)[0])])
        assert name == "simplify" and best == c

    def test_tie_breaks_by_gates_then_order(self):
        c = Circuit(2, (h(0), h(0)), 15)
        same_score = [("a", lambda x: x), ("b", lambda x: x)]
        _, name = portfolio_optimize(c, same_score)
        assert name == "a"

    def test_empty_pipelines_rejected(self):
        with pytest.raises(ValueError):
            portfolio_optimize(Circuit(2), [])


class TestCrxPeriodicity:
    def test_wrapping_crx_pair_not_merged(self):
        # 3.5818 + 5.9585 > 2*pi: merging mod 2*pi would drop a conditional phase
        a = crx(0, 1, 3.581800826658682)
        b = crx(0, 1, 5.958499945237118)
        c = Circuit(2, (rx(0, 2.1968896197148173), a, b), 5)
        out = merge_rotations(c)
        assert equivalent(c, out)

    def test_crx_sum_near_4pi_cancels(self):
        # stored angles live in [0, 2*pi), so a ~4*pi sum needs both near 2*pi
        theta = 2 * math.pi - 5e-14
        c = Circuit(2, (h(0), crx(0, 1, theta), crx(0, 1, theta)), 5)
        out = merge_rotations(c)
        assert len(out.gates) == 1
        assert equivalent(c, out)

    def test_crx_sum_2pi_left_alone(self):
        c = Circuit(2, (h(0), crx(0, 1, math.pi), crx(0, 1, math.pi)), 5)
        out = merge_rotations(c)
        assert len(out.gates) == 3  # CRX(2*pi) is a conditional -1, not identity
        assert equivalent(c, out)
