"""Three-weight message-passing engine.

Each iteration runs four phases over the factor graph:

1. minimize: every factor picks the assignment of its adjacent variables
   that minimizes its local cost plus a weighted squared distance to the
   incoming n messages, and grades each output zero (no opinion),
   standard, or infinite (certain).
2. concur: every variable fuses the incoming factor opinions into a
   single value z (certainty dominates, otherwise a weighted average).
3. local reasoners: read-only hooks over their attached variables that
   can emit events toward the global reasoners.
4. global reasoners: run one at a time, may queue graph edits, request
   emissions (by attaching emitter factors), or halt the run. Queued
   edits are applied atomically at the iteration boundary.

Messages in both directions fold in the per-edge error accumulator u:
the factor sends m = x + u (its assignment plus the running
disagreement), the variable sends n = z - u. That error feedback is what
turns plain averaged projections into an operator-splitting method that
actually converges on hard feasibility problems; u resets whenever
either direction stops carrying standard weight, which keeps certainty
propagation exact.

Convergence is declared when no variable-to-factor message moves by more
than epsilon and the boundary applied no graph edits.

The hot path runs over flat arrays with compiled kernels partitioned
across a thread pool (see _compile / _kernels); the pure functions here
define the contract and serve as the slow reference implementation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import CertaintyConflict, InfeasibleCertainty
from .graph_core import (
    EdgeState,
    EditReport,
    FactorGraph,
    FactorNode,
    GraphEdit,
    Weight,
    register_kind_validator,
)

# --- configuration and per-iteration record ------------------------------


@dataclass
class EngineConfig:
    rho_standard: float = 1.0
    epsilon_convergence: float = 1e-5
    max_iterations: int = 10_000
    thread_count: int = 1
    snapshot_every: int = 1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (self.rho_standard > 0 and math.isfinite(self.rho_standard)):
            raise ValueError("rho_standard must be positive finite")
        if not (self.epsilon_convergence > 0):
            raise ValueError("epsilon_convergence must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.thread_count < 1:
            raise ValueError("thread_count must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


@dataclass
class IterationStatus:
    iteration: int
    converged: bool
    halted_by: str | None
    max_message_delta: float
    live_variables: int
    live_factors: int
    live_edges: int
    edits_applied: int = 0
    new_certain: int = 0
    phase_us: dict[str, float] = field(default_factory=dict)


# --- local minimization: pure contract functions -------------------------

# kind -> fn(params, incoming [(n, weight)], rho) -> [(assignment, weight)]
MINIMIZERS: dict[str, Callable[[dict[str, Any], Sequence[tuple[float, float]], float], list[tuple[float, float]]]] = {}


def register_minimizer(kind: str, fn) -> None:
    MINIMIZERS[kind] = fn


def minimize_factor(
    factor: FactorNode,
    incoming: Sequence[tuple[float, float]],
    rho: float = 1.0,
) -> list[tuple[float, float]]:
    """Run a factor's local minimization on its incoming messages.

    incoming holds one (n, weight) pair per edge in the factor's edge
    order; the result is one (assignment, weight) pair per edge. The
    assignment minimizes the factor's cost plus sum(weight/2 * (v - n)^2)
    treating infinite weights as hard equalities and zero weights as free.
    Raises InfeasibleCertainty when certain inputs contradict the
    factor's hard constraint.
    """
    if len(incoming) != len(factor.edges) and factor.edges:
        raise ValueError(
            f"factor {factor.id} has arity {len(factor.edges)}, got {len(incoming)} messages"
        )
    try:
        fn = MINIMIZERS[factor.kind]
    except KeyError:
        raise KeyError(f"no minimizer registered for factor kind {factor.kind!r}") from None
    return fn(factor.params, incoming, rho)


def _emitter_minimize(params, incoming, rho):
    values = params.get("values", ())
    weights = params.get("weights", ())
    out = []
    for i in range(len(incoming)):
        v = float(values[i]) if i < len(values) else incoming[i][0]
        w = float(weights[i]) if i < len(weights) else 0.0
        out.append((v, w))
    return out


def _emitter_params_ok(params) -> None:
    values = params.get("values", ())
    weights = params.get("weights", ())
    if len(values) != len(weights):
        raise ValueError("values and weights must have equal length")
    for w in weights:
        Weight.check(w)
    for v in values:
        if not math.isfinite(v):
            raise ValueError("emitter values must be finite")


# An emitter factor replays an externally chosen (value, weight) pair per
# edge: it is the outbox of a local reasoner, attached on demand through
# graph dynamics. Default weight zero means "present but silent".
register_minimizer("emitter", _emitter_minimize)
register_kind_validator("emitter", _emitter_params_ok)


def concur_variable(
    incoming: Sequence[tuple[float, float]],
    previous_z: float,
    rho_standard: float = 1.0,
    epsilon: float = 1e-5,
) -> tuple[float, float]:
    """Fuse factor opinions about one variable into (z, outgoing weight).

    Any infinite-weight opinion dominates: z is the mean of the certain
    values (which must agree within epsilon) and the variable becomes
    certain itself. With only zero weights the variable keeps its
    previous value and stays silent. Otherwise z is the weighted average
    over the standard-weight opinions.
    """
    inf_vals: list[float] = []
    wsum = 0.0
    msum = 0.0
    for m, w in incoming:
        if Weight.is_infinite(w):
            inf_vals.append(m)
        elif w > 0.0:
            wsum += w
            msum += w * m
    if inf_vals:
        lo = min(inf_vals)
        hi = max(inf_vals)
        if hi - lo > epsilon:
            raise CertaintyConflict(
                f"certain values disagree: {lo} vs {hi}", variable_id=None
            )
        return sum(inf_vals) / len(inf_vals), Weight.INF
    if wsum > 0.0:
        return msum / wsum, Weight.standard(rho_standard)
    return previous_z, Weight.ZERO


def send_message(state: EdgeState, x: float, weight_to_variable: float) -> tuple[float, float]:
    """Form the factor's outgoing m message for one edge.

    A standard-weight send folds in the accumulated error (m = x + u);
    certain and silent sends carry the bare assignment. Stores the
    message and weight on the edge and returns them.
    """
    if Weight.is_standard(weight_to_variable):
        m = x + state.error_accum
    else:
        m = x
    state.msg_to_variable = m
    state.weight_to_variable = weight_to_variable
    return m, weight_to_variable


def update_edge(
    state: EdgeState,
    x: float,
    z: float,
    outgoing_factor_weight: float,
    variable_weight: float,
) -> EdgeState:
    """Advance one edge's error accumulator and n message after concur.

    With standard weight in both directions the disagreement x - z is
    added to the accumulator; any zero or infinite weight resets it. The
    new variable-to-factor message is n = z - u, and the previous n is
    kept for the convergence test.
    """
    both_standard = Weight.is_standard(outgoing_factor_weight) and Weight.is_standard(variable_weight)
    if both_standard:
        state.error_accum += x - z
    else:
        state.error_accum = 0.0
    state.prev_msg_to_factor = state.msg_to_factor
    state.msg_to_factor = z - state.error_accum
    state.weight_to_factor = variable_weight
    return state


# --- reasoner interfaces --------------------------------------------------


class LocalView:
    """Read access handed to local reasoners after each concur phase."""

    def __init__(self, iteration: int, values: dict, certain: dict, newly_certain: tuple):
        self.iteration = iteration
        self._values = values
        self._certain = certain
        #: variable ids that became certain this iteration, ascending
        self.newly_certain = newly_certain

    def value(self, vid: int) -> float:
        return self._values[vid]

    def certain(self, vid: int) -> bool:
        return self._certain[vid]


class LocalReasoner:
    """Edge-attached knowledge hook with a filtered, read-only view.

    Subclasses watch a set of variables and may emit events toward the
    global reasoners. A local reasoner that wants to influence values
    does so through an emitter factor attached on demand (see
    GlobalContext.queue_edit); while silent it costs nothing and changes
    nothing.
    """

    def watched_variables(self) -> Sequence[int]:
        return ()

    def reason(self, view: LocalView) -> None:  # pragma: no cover - interface
        pass

    def __init__(self) -> None:
        self._events: list[Any] = []

    def emit(self, event: Any) -> None:
        self._events.append(event)

    def take_events(self) -> list[Any]:
        events, self._events = self._events, []
        return events


@dataclass
class EditTicket:
    """Receipt for a queued graph edit.

    For additions, the fresh ids are filled in when the edit is applied
    at the iteration boundary (new_id for a variable/factor/edge,
    new_edge_ids for the edges an AddFactor created).
    """

    edit: GraphEdit
    new_id: int | None = None
    new_edge_ids: tuple[int, ...] = ()


class GlobalContext:
    """Capabilities handed to global reasoners, one at a time.

    Reading is unrestricted; influence is limited to queueing graph
    edits, requesting local emissions (emitter factors via edits), and
    halting. Writing variable values directly is not offered.
    """

    def __init__(self, engine: "_RunState"):
        self._engine = engine
        self.iteration: int = 0
        self.events: tuple = ()
        self.newly_certain: tuple = ()

    @property
    def config(self) -> EngineConfig:
        return self._engine.config

    @property
    def graph(self) -> FactorGraph:
        return self._engine.graph

    def value(self, vid: int) -> float:
        return self._engine.value_of(vid)

    def certain(self, vid: int) -> bool:
        return self._engine.certain_of(vid)

    def weight(self, vid: int) -> float:
        return self._engine.weight_of(vid)

    def gather(self, vids: np.ndarray) -> np.ndarray:
        """Vectorized value lookup; pruned or unknown ids read as NaN."""
        return self._engine.gather(vids)

    @property
    def pending_edit_count(self) -> int:
        """Edits queued so far this iteration (by any reasoner)."""
        return len(self._engine.pending_edits)

    def queue_edit(self, edit: GraphEdit) -> EditTicket:
        ticket = EditTicket(edit=edit)
        self._engine.pending_edits.append(ticket)
        return ticket

    def queue_edits(self, edits: Iterable[GraphEdit]) -> list[EditTicket]:
        return [self.queue_edit(e) for e in edits]

    def halt(self) -> None:
        self._engine.halt_requested = True


class GlobalReasoner:
    """Whole-graph knowledge hook run in the sequential section."""

    name = "global"

    def reason(self, ctx: GlobalContext) -> None:  # pragma: no cover - interface
        pass

    def edits_applied(self, report: EditReport) -> None:
        """Called after a boundary that applied this run's queued edits."""


# --- static work partitioning --------------------------------------------


def schedule(costed_nodes: Sequence[tuple[Any, int]], thread_count: int) -> list[list[Any]]:
    """Partition nodes into per-thread work queues balancing total cost.

    Greedy longest-processing-time fill: nodes sorted by descending cost
    go one at a time to the currently lightest queue. The assignment is
    deterministic (ties break on node order) and stays fixed until the
    graph is edited, at which point the caller rebuilds the queues.
    """
    if thread_count < 1:
        raise ValueError("thread_count must be >= 1")
    queues: list[list[Any]] = [[] for _ in range(thread_count)]
    if thread_count == 1:
        queues[0] = [node for node, _ in costed_nodes]
        return queues
    loads = [0] * thread_count
    order = sorted(range(len(costed_nodes)), key=lambda i: (-costed_nodes[i][1], i))
    for i in order:
        node, cost = costed_nodes[i]
        k = loads.index(min(loads))
        queues[k].append(node)
        loads[k] += cost
    return queues


# --- reference iteration (slow path, used by tests) ----------------------


def reference_iteration(
    graph: FactorGraph,
    rho_standard: float = 1.0,
    epsilon: float = 1e-5,
) -> tuple[float, list[int]]:
    """Run one full minimize + concur + update pass with pure Python.

    Mutates the graph's edge and variable state exactly as the compiled
    path does (same orderings, same sticky certainty) and returns the
    maximum n-message delta plus the variables that became certain.
    Intended for tests and small experiments.
    """
    assignments: dict[int, float] = {}
    for fid in sorted(graph.factors):
        fac = graph.factors[fid]
        if not fac.edges:
            continue
        incoming = []
        for eid in fac.edges:
            st = graph.edges[eid].state
            incoming.append((st.msg_to_factor, st.weight_to_factor))
        try:
            outs = minimize_factor(fac, incoming, rho_standard)
        except InfeasibleCertainty as exc:
            exc.factor_id = fid
            raise
        for eid, (x, w) in zip(fac.edges, outs):
            st = graph.edges[eid].state
            assignments[eid] = x
            send_message(st, x, w)

    max_delta = 0.0
    newly_certain: list[int] = []
    for vid in sorted(graph.variables):
        var = graph.variables[vid]
        ordered = sorted(var.edges)
        incoming = []
        for eid in ordered:
            st = graph.edges[eid].state
            incoming.append((st.msg_to_variable, st.weight_to_variable))
        if var.certain:
            z = var.concurred
            new_w = Weight.INF
            for m, w in incoming:
                if Weight.is_infinite(w) and abs(m - z) > epsilon:
                    raise CertaintyConflict(
                        f"certain value {m} contradicts pinned {z}", variable_id=vid
                    )
        else:
            try:
                z, new_w = concur_variable(incoming, var.concurred, rho_standard, epsilon)
            except CertaintyConflict as exc:
                exc.variable_id = vid
                raise
            if Weight.is_infinite(new_w):
                var.certain = True
                newly_certain.append(vid)
        var.concurred = z
        var.out_weight = new_w
        for eid in ordered:
            st = graph.edges[eid].state
            x = assignments.get(eid, st.msg_to_variable)
            update_edge(st, x, z, st.weight_to_variable, new_w)
            delta = abs(st.msg_to_factor - st.prev_msg_to_factor)
            if delta > max_delta:
                max_delta = delta
    graph.initialized = True
    return max_delta, newly_certain


# --- the run loop ---------------------------------------------------------


class _RunState:
    """Internal mutable state shared between run() and GlobalContext."""

    def __init__(self, graph: FactorGraph, config: EngineConfig):
        self.graph = graph
        self.config = config
        self.pending_edits: list[EditTicket] = []
        self.halt_requested = False
        self.halted_by: str | None = None
        self.epoch = None  # set by run()

    def value_of(self, vid: int) -> float:
        ep = self.epoch
        return float(ep.v_z[ep.var_index[vid]])

    def certain_of(self, vid: int) -> bool:
        ep = self.epoch
        return bool(ep.v_certain[ep.var_index[vid]])

    def weight_of(self, vid: int) -> float:
        ep = self.epoch
        return float(ep.v_wout[ep.var_index[vid]])

    def gather(self, vids: np.ndarray) -> np.ndarray:
        ep = self.epoch
        idx = ep.var_lookup[np.asarray(vids, dtype=np.int64)]
        safe = np.maximum(idx, 0)
        out = ep.v_z[safe].astype(np.float64)
        out[(idx < 0) | (ep.v_alive[safe] == 0)] = np.nan  # pruned reads as NaN
        return out


def run(
    graph: FactorGraph,
    config: EngineConfig,
    local_reasoners: Sequence[LocalReasoner] = (),
    global_reasoners: Sequence[GlobalReasoner] = (),
) -> Iterator[IterationStatus]:
    """Iterate the graph to convergence, halt, or the iteration budget.

    Yields one IterationStatus per iteration. On normal exit (and on
    solver errors) the graph's variable and edge state is synced back
    from the compiled arrays, so snapshot() reflects the final values.
    Graph edits queued by global reasoners are applied between
    iterations; a boundary that edited the graph never reports
    convergence, so a freshly mutated graph always gets at least one more
    pass.
    """
    from . import _compile

    state = _RunState(graph, config)
    epoch = _compile.compile_epoch(graph, config)
    state.epoch = epoch
    ctx = GlobalContext(state)
    pool = None
    if config.thread_count > 1:
        from concurrent.futures import ThreadPoolExecutor

        pool = ThreadPoolExecutor(max_workers=config.thread_count)
    try:
        for iteration in range(1, config.max_iterations + 1):
            t0 = time.perf_counter()
            _compile.run_minimize(epoch, config, pool, iteration)
            t1 = time.perf_counter()
            max_delta, newly = _compile.run_concur(epoch, config, pool, iteration)
            t2 = time.perf_counter()

            newly_ids = tuple(int(epoch.v_ids[i]) for i in newly)
            if local_reasoners:
                view = LocalView(
                    iteration,
                    values=_EpochValues(epoch),
                    certain=_EpochCertain(epoch),
                    newly_certain=newly_ids,
                )
                events: list[Any] = []
                for lr in local_reasoners:
                    lr.reason(view)
                    events.extend(lr.take_events())
            else:
                events = []
            t3 = time.perf_counter()

            ctx.iteration = iteration
            ctx.events = tuple(events)
            ctx.newly_certain = newly_ids
            for gr in global_reasoners:
                gr.reason(ctx)
                if state.halt_requested and state.halted_by is None:
                    state.halted_by = getattr(gr, "name", type(gr).__name__)
            t4 = time.perf_counter()

            edits_applied = 0
            if state.pending_edits:
                tickets = state.pending_edits
                state.pending_edits = []
                epoch, report = _compile.apply_boundary_edits(epoch, graph, config, tickets)
                state.epoch = epoch
                edits_applied = report.applied
                for gr in global_reasoners:
                    gr.edits_applied(report)
            t5 = time.perf_counter()

            graph.initialized = True
            converged = max_delta < config.epsilon_convergence and edits_applied == 0
            status = IterationStatus(
                iteration=iteration,
                converged=converged and not state.halt_requested,
                halted_by=state.halted_by,
                max_message_delta=max_delta,
                live_variables=epoch.live_variables,
                live_factors=epoch.live_factors,
                live_edges=epoch.live_edges,
                edits_applied=edits_applied,
                new_certain=len(newly_ids),
                phase_us={
                    "minimize": (t1 - t0) * 1e6,
                    "concur": (t2 - t1) * 1e6,
                    "local": (t3 - t2) * 1e6,
                    "global": (t4 - t3) * 1e6,
                    "edits": (t5 - t4) * 1e6,
                },
            )
            yield status
            if status.converged or state.halt_requested:
                break
    finally:
        _compile.sync_graph(epoch, graph)
        if pool is not None:
            pool.shutdown(wait=True)


class _EpochValues:
    """Mapping-ish view of concurred values straight from the epoch arrays."""

    def __init__(self, epoch):
        self._epoch = epoch

    def __getitem__(self, vid: int) -> float:
        ep = self._epoch
        return float(ep.v_z[ep.var_index[vid]])


class _EpochCertain:
    def __init__(self, epoch):
        self._epoch = epoch

    def __getitem__(self, vid: int) -> bool:
        ep = self._epoch
        return bool(ep.v_certain[ep.var_index[vid]])
