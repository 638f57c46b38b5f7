"""Factor-graph data model and runtime graph mutation.

A problem is a bipartite graph: variable nodes on one side, factor nodes
(costs and hard constraints) on the other, joined by stateful edges that
carry the messages the solver exchanges. This module owns identities,
edge state, and the four classes of graph dynamics (adding variables and
factors, adding and removing edges, removing factors, re-parameterizing
factors in place), including the automatic pruning of variables that
lose their last edge.

Everything here is plain data plus bookkeeping. The iteration semantics
live in twa_engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .errors import KindMismatch, NotYetConcurred, UnknownId

VariableId = int
FactorId = int
EdgeId = int


class Weight:
    """Weight classes encoded as plain floats.

    0.0 means "no opinion", a positive finite value is a standard weight
    (magnitude rho, usually 1.0), and infinity means certainty. Dominance
    ordering (infinite > standard > zero) falls out of float comparison.
    """

    ZERO: float = 0.0
    INF: float = math.inf

    @staticmethod
    def standard(magnitude: float = 1.0) -> float:
        if not (magnitude > 0.0 and math.isfinite(magnitude)):
            raise ValueError(f"standard weight must be positive finite, got {magnitude}")
        return float(magnitude)

    @staticmethod
    def is_zero(w: float) -> bool:
        return w == 0.0

    @staticmethod
    def is_standard(w: float) -> bool:
        return 0.0 < w < math.inf

    @staticmethod
    def is_infinite(w: float) -> bool:
        return w == math.inf

    @staticmethod
    def check(w: float) -> float:
        if not (w >= 0.0):  # rejects negatives and NaN in one test
            raise ValueError(f"weight must be >= 0 (or inf), got {w}")
        return float(w)


@dataclass
class EdgeState:
    """Message state carried by one factor-variable edge.

    msg_to_factor is the n message (variable's opinion toward the factor),
    msg_to_variable the m message (factor's opinion toward the variable),
    error_accum the running disagreement term u folded into both
    directions, and prev_msg_to_factor the previous n for the convergence
    test.
    """

    msg_to_factor: float = 0.0
    msg_to_variable: float = 0.0
    weight_to_factor: float = 1.0
    weight_to_variable: float = 1.0
    error_accum: float = 0.0
    prev_msg_to_factor: float = 0.0


@dataclass
class Edge:
    id: EdgeId
    factor: FactorId
    variable: VariableId
    state: EdgeState


@dataclass
class VariableNode:
    """One continuous variable plus its concurred (consensus) value z."""

    id: VariableId
    concurred: float = 0.0
    edges: set[EdgeId] = field(default_factory=set)
    # Outgoing weight of the variable's n messages, set by the concur phase.
    out_weight: float = 1.0
    # Sticky certainty: once true, concurred is frozen and out_weight stays
    # infinite for the rest of the run.
    certain: bool = False


@dataclass
class FactorNode:
    """A cost or hard-constraint node.

    kind tags which local minimization routine applies; params is an
    opaque kind-specific block so a factor can be re-parameterized (the
    packing factor pool relies on this) without a new identity. edges is
    ordered: minimizers rely on slot order matching creation order.
    """

    id: FactorId
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    edges: list[EdgeId] = field(default_factory=list)


# --- graph edits ---------------------------------------------------------


@dataclass(frozen=True)
class AddVariable:
    initial_value: float = 0.0


@dataclass(frozen=True)
class AddFactor:
    kind: str
    params: dict[str, Any]
    variables: tuple[VariableId, ...]


@dataclass(frozen=True)
class AddEdge:
    factor: FactorId
    variable: VariableId


@dataclass(frozen=True)
class RemoveEdge:
    edge: EdgeId


@dataclass(frozen=True)
class RemoveFactor:
    factor: FactorId


@dataclass(frozen=True)
class Reparameterize:
    factor: FactorId
    params: dict[str, Any]


GraphEdit = AddVariable | AddFactor | AddEdge | RemoveEdge | RemoveFactor | Reparameterize


@dataclass
class EditReport:
    """Outcome of one apply_edits batch.

    pruned_variables lists variables dropped automatically after losing
    their last edge; pruned_edges lists edges removed as a cascade (a
    RemoveFactor taking its edges along), not ones named directly. The
    new_* lists are in application order so a caller that queued additions
    can match them up with the fresh ids.
    """

    applied: int = 0
    pruned_variables: list[VariableId] = field(default_factory=list)
    pruned_edges: list[EdgeId] = field(default_factory=list)
    new_variables: list[VariableId] = field(default_factory=list)
    new_factors: list[FactorId] = field(default_factory=list)
    new_edges: list[EdgeId] = field(default_factory=list)


# Optional per-kind params validators, registered by the modules that
# define factor kinds. Reparameterize consults these; unknown kinds are
# accepted as-is so tests can use ad-hoc factors.
_KIND_VALIDATORS: dict[str, Callable[[dict[str, Any]], None]] = {}


def register_kind_validator(kind: str, validator: Callable[[dict[str, Any]], None]) -> None:
    _KIND_VALIDATORS[kind] = validator


def validate_params(kind: str, params: dict[str, Any]) -> None:
    """Raise KindMismatch if params do not fit the kind's schema."""
    checker = _KIND_VALIDATORS.get(kind)
    if checker is None:
        return
    try:
        checker(params)
    except KindMismatch:
        raise
    except Exception as exc:
        raise KindMismatch(f"params invalid for factor kind {kind!r}: {exc}") from exc


class FactorGraph:
    """Mutable bipartite factor graph with never-reused integer ids."""

    def __init__(self, default_edge_weight: float = 1.0):
        self.variables: dict[VariableId, VariableNode] = {}
        self.factors: dict[FactorId, FactorNode] = {}
        self.edges: dict[EdgeId, Edge] = {}
        self.default_edge_weight = default_edge_weight
        # True once variable values are meaningful (builder seeded them or
        # a concur phase has run); snapshot refuses to run before that.
        self.initialized = False
        self._next_variable: VariableId = 0
        self._next_factor: FactorId = 0
        self._next_edge: EdgeId = 0

    # --- lookups ---------------------------------------------------------

    def variable(self, vid: VariableId) -> VariableNode:
        try:
            return self.variables[vid]
        except KeyError:
            raise UnknownId(f"no variable {vid}") from None

    def factor(self, fid: FactorId) -> FactorNode:
        try:
            return self.factors[fid]
        except KeyError:
            raise UnknownId(f"no factor {fid}") from None

    def edge(self, eid: EdgeId) -> Edge:
        try:
            return self.edges[eid]
        except KeyError:
            raise UnknownId(f"no edge {eid}") from None

    def live_factor_count(self) -> int:
        """Factors with at least one edge (pooled zero-edge factors excluded)."""
        return sum(1 for f in self.factors.values() if f.edges)

    def live_edge_count(self) -> int:
        return len(self.edges)

    def live_variable_count(self) -> int:
        return len(self.variables)

    # --- construction ----------------------------------------------------

    def add_variable(self, initial_value: float = 0.0) -> VariableId:
        vid = self._next_variable
        self._next_variable += 1
        self.variables[vid] = VariableNode(id=vid, concurred=float(initial_value))
        return vid

    def add_factor(
        self,
        kind: str,
        params: dict[str, Any] | None = None,
        variables: Sequence[VariableId] = (),
    ) -> FactorId:
        params = dict(params or {})
        validate_params(kind, params)
        for vid in variables:
            self.variable(vid)  # existence check before mutating anything
        fid = self._next_factor
        self._next_factor += 1
        self.factors[fid] = FactorNode(id=fid, kind=kind, params=params)
        for vid in variables:
            self.add_edge(fid, vid)
        return fid

    def add_edge(self, fid: FactorId, vid: VariableId) -> EdgeId:
        fac = self.factor(fid)
        var = self.variable(vid)
        eid = self._next_edge
        self._next_edge += 1
        w = self.default_edge_weight
        # A new edge starts from the variable's current consensus with no
        # accumulated error, so it injects no stale opinion.
        n0 = var.concurred
        state = EdgeState(
            msg_to_factor=n0,
            msg_to_variable=n0,
            weight_to_factor=w,
            weight_to_variable=w,
            error_accum=0.0,
            prev_msg_to_factor=n0,
        )
        self.edges[eid] = Edge(id=eid, factor=fid, variable=vid, state=state)
        fac.edges.append(eid)
        var.edges.add(eid)
        return eid

    # --- removal with automatic variable pruning -------------------------

    def _remove_edge_inner(self, eid: EdgeId, report: EditReport, cascade: bool) -> None:
        edge = self.edge(eid)
        del self.edges[eid]
        fac = self.factors.get(edge.factor)
        if fac is not None:
            fac.edges.remove(eid)
        var = self.variables.get(edge.variable)
        if var is not None:
            var.edges.discard(eid)
            if not var.edges:
                del self.variables[edge.variable]
                report.pruned_variables.append(edge.variable)
        if cascade:
            report.pruned_edges.append(eid)

    def _remove_factor_inner(self, fid: FactorId, report: EditReport) -> None:
        fac = self.factor(fid)
        for eid in list(fac.edges):
            self._remove_edge_inner(eid, report, cascade=True)
        del self.factors[fid]

    # --- batch edits ------------------------------------------------------

    def apply_edits(self, edits: Iterable[GraphEdit]) -> EditReport:
        """Apply an ordered batch of graph edits.

        Each edit is validated when its turn comes; on failure the error
        is raised immediately and earlier edits in the batch remain
        applied (callers treat that as fatal). Variables left with zero
        edges by a removal are pruned automatically and reported.
        """
        report = EditReport()
        for edit in edits:
            if isinstance(edit, AddVariable):
                report.new_variables.append(self.add_variable(edit.initial_value))
            elif isinstance(edit, AddFactor):
                fid = self.add_factor(edit.kind, edit.params, edit.variables)
                report.new_factors.append(fid)
                report.new_edges.extend(self.factors[fid].edges)
            elif isinstance(edit, AddEdge):
                report.new_edges.append(self.add_edge(edit.factor, edit.variable))
            elif isinstance(edit, RemoveEdge):
                self._remove_edge_inner(edit.edge, report, cascade=False)
            elif isinstance(edit, RemoveFactor):
                self._remove_factor_inner(edit.factor, report)
            elif isinstance(edit, Reparameterize):
                fac = self.factor(edit.factor)
                params = dict(edit.params)
                validate_params(fac.kind, params)
                fac.params = params
            else:
                raise TypeError(f"not a GraphEdit: {edit!r}")
            report.applied += 1
        return report

    # --- reads -----------------------------------------------------------

    def snapshot(self) -> dict[VariableId, float]:
        """Current concurred value per variable; stable between iterations."""
        if not self.initialized:
            raise NotYetConcurred("no concur phase has run and no initial values were seeded")
        return {vid: var.concurred for vid, var in self.variables.items()}

    def validate(self) -> list[str]:
        """Walk the whole graph and return a list of integrity problems.

        An empty list means the graph is consistent: edges join existing
        factors to existing variables, both endpoints list the edge back,
        ordered edge lists hold no duplicates, and id counters are ahead
        of every issued id.
        """
        problems: list[str] = []
        for eid, edge in self.edges.items():
            if edge.factor not in self.factors:
                problems.append(f"edge {eid} references missing factor {edge.factor}")
            elif eid not in self.factors[edge.factor].edges:
                problems.append(f"factor {edge.factor} does not list edge {eid}")
            if edge.variable not in self.variables:
                problems.append(f"edge {eid} references missing variable {edge.variable}")
            elif eid not in self.variables[edge.variable].edges:
                problems.append(f"variable {edge.variable} does not list edge {eid}")
        for fid, fac in self.factors.items():
            if len(set(fac.edges)) != len(fac.edges):
                problems.append(f"factor {fid} lists duplicate edges")
            for eid in fac.edges:
                if eid not in self.edges:
                    problems.append(f"factor {fid} lists missing edge {eid}")
                elif self.edges[eid].factor != fid:
                    problems.append(f"factor {fid} lists edge {eid} owned by {self.edges[eid].factor}")
        for vid, var in self.variables.items():
            for eid in var.edges:
                if eid not in self.edges:
                    problems.append(f"variable {vid} lists missing edge {eid}")
                elif self.edges[eid].variable != vid:
                    problems.append(f"variable {vid} lists edge {eid} owned by {self.edges[eid].variable}")
        if self.variables and max(self.variables) >= self._next_variable:
            problems.append("variable id counter behind issued ids")
        if self.factors and max(self.factors) >= self._next_factor:
            problems.append("factor id counter behind issued ids")
        if self.edges and max(self.edges) >= self._next_edge:
            problems.append("edge id counter behind issued ids")
        return problems
