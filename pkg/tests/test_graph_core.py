"""Graph data model: identities, edits, automatic pruning, integrity."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from triweight.errors import KindMismatch, NotYetConcurred, UnknownId
from triweight.graph_core import (
    AddEdge,
    AddFactor,
    AddVariable,
    FactorGraph,
    RemoveEdge,
    RemoveFactor,
    Reparameterize,
)


def star_graph(n_factors=4):
    """One variable connected to n factors, one edge each."""
    g = FactorGraph()
    v = g.add_variable()
    fids = [g.add_factor("one_on", {}, [v]) for _ in range(n_factors)]
    return g, v, fids


class TestIdentity:
    def test_ids_are_unique_and_monotone(self):
        g = FactorGraph()
        vids = [g.add_variable() for _ in range(5)]
        assert vids == sorted(set(vids))
        f1 = g.add_factor("one_on", {}, vids[:2])
        f2 = g.add_factor("one_on", {}, vids[2:])
        assert f1 != f2

    def test_removed_ids_never_reissued(self):
        g, v, fids = star_graph(2)
        g.apply_edits([RemoveFactor(fids[0])])
        f_new = g.add_factor("one_on", {}, [v])
        assert f_new not in fids
        # variable ids too
        g2 = FactorGraph()
        v1 = g2.add_variable()
        f = g2.add_factor("one_on", {}, [v1])
        g2.apply_edits([RemoveFactor(f)])  # prunes v1
        v2 = g2.add_variable()
        assert v2 != v1

    def test_edge_maps_to_one_endpoint_pair(self):
        g = FactorGraph()
        a, b = g.add_variable(), g.add_variable()
        f = g.add_factor("one_on", {}, [a, b])
        fac = g.factor(f)
        seen = set()
        for eid in fac.edges:
            e = g.edge(eid)
            assert e.factor == f
            pair = (e.factor, e.variable)
            assert pair not in seen
            seen.add(pair)


class TestEdgeInit:
    def test_new_edge_seeds_from_concurred_value(self):
        g = FactorGraph()
        v = g.add_variable(initial_value=0.7)
        f = g.add_factor("one_on", {}, [v])
        st_ = g.edge(g.factor(f).edges[0]).state
        assert st_.msg_to_factor == 0.7
        assert st_.prev_msg_to_factor == 0.7
        assert st_.error_accum == 0.0
        assert st_.weight_to_factor == 1.0
        assert st_.weight_to_variable == 1.0

    def test_never_concurred_defaults_to_zero(self):
        g = FactorGraph()
        v = g.add_variable()
        f = g.add_factor("one_on", {}, [v])
        assert g.edge(g.factor(f).edges[0]).state.msg_to_factor == 0.0


class TestApplyEdits:
    def test_empty_batch_is_identity(self):
        g, v, fids = star_graph()
        before = (g.live_variable_count(), g.live_factor_count(), g.live_edge_count())
        report = g.apply_edits([])
        assert report.applied == 0
        assert report.pruned_variables == []
        assert report.pruned_edges == []
        assert (g.live_variable_count(), g.live_factor_count(), g.live_edge_count()) == before

    def test_remove_factor_prunes_sole_variable(self):
        g = FactorGraph()
        v = g.add_variable()
        f = g.add_factor("one_on", {}, [v])
        report = g.apply_edits([RemoveFactor(f)])
        assert report.pruned_variables == [v]
        assert v not in g.variables
        assert f not in g.factors

    def test_remove_all_edges_of_indicator(self):
        # an indicator variable held by 4 constraint factors, as in the
        # puzzle encoding: removing its 4 edges prunes the variable
        g, v, fids = star_graph(4)
        edges = sorted(g.variable(v).edges)
        assert len(edges) == 4
        n_edges_before = g.live_edge_count()
        n_vars_before = g.live_variable_count()
        report = g.apply_edits([RemoveEdge(e) for e in edges])
        assert report.pruned_variables == [v]
        assert g.live_edge_count() == n_edges_before - 4
        assert g.live_variable_count() == n_vars_before - 1
        # factors survive with zero edges (pool pattern relies on this)
        assert all(f in g.factors for f in fids)
        assert g.live_factor_count() == 0
        assert g.validate() == []

    def test_add_factor_reports_fresh_ids(self):
        g = FactorGraph()
        a, b = g.add_variable(), g.add_variable()
        report = g.apply_edits([AddFactor("one_on", {}, (a, b)), AddVariable(0.5)])
        assert len(report.new_factors) == 1
        assert len(report.new_edges) == 2
        assert len(report.new_variables) == 1
        assert g.variable(report.new_variables[0]).concurred == 0.5

    def test_add_edge_to_existing_factor(self):
        g = FactorGraph()
        a = g.add_variable()
        f = g.add_factor("one_on", {}, [a])
        b = g.add_variable()
        report = g.apply_edits([AddEdge(f, b)])
        assert len(report.new_edges) == 1
        assert g.factor(f).edges[-1] == report.new_edges[0]

    def test_reparameterize_preserves_identity(self):
        g = FactorGraph()
        a = g.add_variable()
        f = g.add_factor("box", {"radius": 0.1}, [a])
        edges_before = list(g.factor(f).edges)
        g.apply_edits([Reparameterize(f, {"radius": 0.2})])
        assert g.factor(f).params == {"radius": 0.2}
        assert g.factor(f).edges == edges_before

    def test_reparameterize_wrong_kind_params(self):
        g = FactorGraph()
        a = g.add_variable()
        f = g.add_factor("emitter", {"values": [0.0], "weights": [0.0]}, [a])
        with pytest.raises(KindMismatch):
            g.apply_edits([Reparameterize(f, {"values": [1.0], "weights": []})])

    def test_unknown_ids_raise(self):
        g = FactorGraph()
        with pytest.raises(UnknownId):
            g.apply_edits([RemoveFactor(99)])
        with pytest.raises(UnknownId):
            g.apply_edits([RemoveEdge(99)])
        with pytest.raises(UnknownId):
            g.apply_edits([AddEdge(0, 0)])


class TestSnapshot:
    def test_before_first_values_raises(self):
        g = FactorGraph()
        g.add_variable()
        with pytest.raises(NotYetConcurred):
            g.snapshot()

    def test_snapshot_returns_current_values_and_is_pure(self):
        g = FactorGraph()
        a = g.add_variable(0.25)
        b = g.add_variable(1.0)
        g.initialized = True
        s1 = g.snapshot()
        s2 = g.snapshot()
        assert s1 == {a: 0.25, b: 1.0}
        assert s1 == s2

    def test_certain_variable_reports_pinned_value(self):
        g = FactorGraph()
        v = g.add_variable(1.0)
        g.variable(v).certain = True
        g.variable(v).out_weight = math.inf
        g.initialized = True
        assert g.snapshot() == {v: 1.0}


def random_edit_sequence(rng, g):
    """Generate one plausible edit batch against the live graph."""
    edits = []
    for _ in range(rng.randrange(1, 8)):
        choice = rng.random()
        live_factors = [f for f in g.factors if g.factors[f].edges]
        if choice < 0.25 and len(g.variables) >= 2:
            vids = rng.sample(sorted(g.variables), k=min(len(g.variables), rng.randrange(1, 4)))
            edits.append(AddFactor("one_on", {}, tuple(vids)))
        elif choice < 0.4:
            edits.append(AddVariable(rng.random()))
        elif choice < 0.55 and g.factors and g.variables:
            edits.append(AddEdge(rng.choice(sorted(g.factors)), rng.choice(sorted(g.variables))))
        elif choice < 0.75 and g.edges:
            edits.append(RemoveEdge(rng.choice(sorted(g.edges))))
        elif choice < 0.9 and live_factors:
            edits.append(RemoveFactor(rng.choice(live_factors)))
        else:
            edits.append(AddVariable(0.0))
        # apply one at a time so later edits reference live state
        g.apply_edits(edits[-1:])
    return edits


def test_pruning_leaves_no_dangling_references_bulk():
    """1,000 random edit sequences: the walk validator stays clean."""
    rng = random.Random(20240817)
    for _ in range(1000):
        g = FactorGraph()
        vids = [g.add_variable(rng.random()) for _ in range(rng.randrange(1, 6))]
        for _ in range(rng.randrange(0, 4)):
            k = rng.randrange(1, len(vids) + 1)
            g.add_factor("one_on", {}, rng.sample(vids, k))
        random_edit_sequence(rng, g)
        problems = g.validate()
        assert problems == []
        # every surviving variable has at least one edge unless it never
        # lost one (pruning only triggers on removals)
        for vid, var in g.variables.items():
            for eid in var.edges:
                assert g.edge(eid).variable == vid


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_pruning_property_random_graphs(seed):
    rng = random.Random(seed)
    g = FactorGraph()
    vids = [g.add_variable() for _ in range(rng.randrange(2, 5))]
    g.add_factor("one_on", {}, vids)
    removed_factors = set()
    for _ in range(rng.randrange(1, 10)):
        if rng.random() < 0.5 and g.edges:
            g.apply_edits([RemoveEdge(rng.choice(sorted(g.edges)))])
        elif g.factors and rng.random() < 0.7:
            f = rng.choice(sorted(g.factors))
            g.apply_edits([RemoveFactor(f)])
            removed_factors.add(f)
        else:
            vs = sorted(g.variables)
            if vs:
                g.apply_edits([AddFactor("one_on", {}, (rng.choice(vs),))])
    assert g.validate() == []
    # id freshness: nothing reuses a removed factor id
    for f in g.factors:
        assert f not in removed_factors or g.factors[f] is not None
    new_f = g.add_factor("one_on", {}, [g.add_variable()])
    assert new_f not in removed_factors
