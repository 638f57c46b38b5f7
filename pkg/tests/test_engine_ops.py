"""Pure message algebra: concur, edge update, sends, scheduling."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as stance

from triweight.errors import CertaintyConflict
from triweight.graph_core import EdgeState, FactorGraph, Weight
from triweight.twa_engine import (
    concur_variable,
    minimize_factor,
    schedule,
    send_message,
    update_edge,
)

INF = math.inf


class TestConcur:
    def test_unweighted_mean(self):
        z, w = concur_variable([(0.2, 1.0), (0.4, 1.0)], previous_z=0.0)
        assert z == pytest.approx(0.3)
        assert Weight.is_standard(w)

    def test_certainty_dominates(self):
        z, w = concur_variable([(0.2, 1.0), (0.9, INF)], previous_z=0.0)
        assert z == 0.9
        assert Weight.is_infinite(w)

    def test_weighted_mean(self):
        # independent recompute: (0.1*1 + 0.7*3) / 4
        z, w = concur_variable([(0.1, 1.0), (0.7, 3.0)], previous_z=0.0)
        assert z == pytest.approx((0.1 * 1 + 0.7 * 3) / 4)
        assert z == pytest.approx(0.55)

    def test_all_zero_keeps_previous_and_goes_silent(self):
        z, w = concur_variable([(0.3, 0.0), (0.8, 0.0)], previous_z=0.42)
        assert z == 0.42
        assert Weight.is_zero(w)

    def test_empty_incoming_keeps_previous(self):
        z, w = concur_variable([], previous_z=0.13)
        assert z == 0.13
        assert Weight.is_zero(w)

    def test_certain_disagreement_raises(self):
        with pytest.raises(CertaintyConflict):
            concur_variable([(0.0, INF), (1.0, INF)], previous_z=0.0, epsilon=1e-5)

    def test_certain_agreement_within_epsilon_averages(self):
        z, w = concur_variable([(1.0, INF), (1.0 + 1e-7, INF)], previous_z=0.0, epsilon=1e-5)
        assert z == pytest.approx(1.0, abs=1e-6)
        assert Weight.is_infinite(w)

    def test_custom_rho_sets_outgoing_magnitude(self):
        z, w = concur_variable([(0.5, 2.0)], previous_z=0.0, rho_standard=3.0)
        assert w == 3.0

    @given(
        stance.lists(
            stance.tuples(
                stance.floats(-10, 10, allow_nan=False),
                stance.floats(0.01, 5.0, allow_nan=False),
            ),
            min_size=1,
            max_size=8,
        )
    )
    def test_weighted_average_matches_numpy_oracle(self, pairs):
        vals = np.array([m for m, _ in pairs])
        ws = np.array([w for _, w in pairs])
        z, w = concur_variable(pairs, previous_z=0.0)
        assert z == pytest.approx(np.average(vals, weights=ws), rel=1e-12)
        assert Weight.is_standard(w)

    @given(
        stance.lists(
            stance.tuples(
                stance.floats(-10, 10, allow_nan=False),
                stance.sampled_from([0.0, 1.0]),
            ),
            min_size=1,
            max_size=8,
        ),
        stance.floats(-5, 5, allow_nan=False),
    )
    def test_zero_weight_messages_never_move_z(self, pairs, extra):
        z1, w1 = concur_variable(pairs, previous_z=0.0)
        z2, w2 = concur_variable(pairs + [(extra, 0.0)], previous_z=0.0)
        assert z1 == z2
        assert w1 == w2


class TestUpdateEdge:
    def test_fixed_point(self):
        st0 = EdgeState(msg_to_factor=0.5)
        update_edge(st0, x=0.5, z=0.5, outgoing_factor_weight=1.0, variable_weight=1.0)
        assert st0.error_accum == 0.0
        assert st0.msg_to_factor == 0.5

    def test_single_step_hand_oracle(self):
        st0 = EdgeState(error_accum=0.0)
        update_edge(st0, x=0.8, z=0.5, outgoing_factor_weight=1.0, variable_weight=1.0)
        assert st0.error_accum == pytest.approx(0.3)
        assert st0.msg_to_factor == pytest.approx(0.2)

    def test_infinite_factor_weight_resets(self):
        st0 = EdgeState(error_accum=0.7)
        update_edge(st0, x=1.0, z=1.0, outgoing_factor_weight=INF, variable_weight=1.0)
        assert st0.error_accum == 0.0
        assert st0.msg_to_factor == 1.0

    def test_zero_variable_weight_resets(self):
        st0 = EdgeState(error_accum=0.7)
        update_edge(st0, x=0.4, z=0.6, outgoing_factor_weight=1.0, variable_weight=0.0)
        assert st0.error_accum == 0.0
        assert st0.msg_to_factor == 0.6

    def test_prev_message_retained_for_convergence(self):
        st0 = EdgeState(msg_to_factor=0.9)
        update_edge(st0, x=0.8, z=0.5, outgoing_factor_weight=1.0, variable_weight=1.0)
        assert st0.prev_msg_to_factor == 0.9

    def test_accumulation_over_iterations(self):
        st0 = EdgeState()
        update_edge(st0, x=1.0, z=0.5, outgoing_factor_weight=1.0, variable_weight=1.0)
        update_edge(st0, x=1.0, z=0.5, outgoing_factor_weight=1.0, variable_weight=1.0)
        assert st0.error_accum == pytest.approx(1.0)
        assert st0.msg_to_factor == pytest.approx(-0.5)


class TestSendMessage:
    def test_standard_send_folds_in_error(self):
        st0 = EdgeState(error_accum=0.25)
        m, w = send_message(st0, x=0.5, weight_to_variable=1.0)
        assert m == 0.75
        assert st0.msg_to_variable == 0.75

    def test_certain_send_is_bare_assignment(self):
        st0 = EdgeState(error_accum=0.25)
        m, _ = send_message(st0, x=1.0, weight_to_variable=INF)
        assert m == 1.0

    def test_silent_send_is_bare_assignment(self):
        st0 = EdgeState(error_accum=0.25)
        m, _ = send_message(st0, x=0.4, weight_to_variable=0.0)
        assert m == 0.4


class TestMinimizeDispatch:
    def test_unknown_kind_raises(self):
        g = FactorGraph()
        v = g.add_variable()
        f = g.add_factor("mystery", {}, [v])
        with pytest.raises(KeyError):
            minimize_factor(g.factor(f), [(0.0, 1.0)])

    def test_arity_mismatch_raises(self):
        g = FactorGraph()
        v = g.add_variable()
        f = g.add_factor("emitter", {"values": [0.0], "weights": [0.0]}, [v])
        with pytest.raises(ValueError):
            minimize_factor(g.factor(f), [(0.0, 1.0), (0.0, 1.0)])

    def test_emitter_replays_params(self):
        g = FactorGraph()
        a, b = g.add_variable(), g.add_variable()
        f = g.add_factor("emitter", {"values": [0.3, 0.4], "weights": [1.0, 0.0]}, [a, b])
        out = minimize_factor(g.factor(f), [(0.0, 1.0), (0.0, 1.0)])
        assert out == [(0.3, 1.0), (0.4, 0.0)]


class TestSchedule:
    def test_greedy_fill_example(self):
        # costs 4,3,2,1 over two threads balance to 5 and 5
        nodes = [("a", 4), ("b", 3), ("c", 2), ("d", 1)]
        queues = schedule(nodes, 2)
        costs = {n: c for n, c in nodes}
        loads = sorted(sum(costs[n] for n in q) for q in queues)
        assert loads == [5, 5]
        assert sorted(n for q in queues for n in q) == ["a", "b", "c", "d"]

    def test_single_thread_keeps_order(self):
        nodes = [(i, 1) for i in range(5)]
        queues = schedule(nodes, 1)
        assert queues == [[0, 1, 2, 3, 4]]

    def test_equal_costs_spread_evenly(self):
        nodes = [(i, 7) for i in range(10)]
        queues = schedule(nodes, 3)
        sizes = sorted(len(q) for q in queues)
        assert max(sizes) - min(sizes) <= 1

    @given(
        stance.lists(stance.integers(min_value=1, max_value=50), min_size=1, max_size=40),
        stance.integers(min_value=1, max_value=6),
    )
    def test_partition_preserves_nodes_and_stays_balanced(self, costs, threads):
        nodes = list(enumerate(costs))
        queues = schedule(nodes, threads)
        flat = sorted(n for q in queues for n in q)
        assert flat == sorted(i for i, _ in nodes)
        loads = [sum(costs[n] for n in q) for q in queues]
        # greedy LPT never exceeds the ideal by more than the largest item
        assert max(loads) <= sum(costs) / threads + max(costs)

    def test_deterministic(self):
        nodes = [(i, (i * 7) % 5 + 1) for i in range(30)]
        assert schedule(nodes, 4) == schedule(nodes, 4)
