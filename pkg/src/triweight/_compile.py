"""Flattening of a factor graph into kernel-ready arrays.

An epoch is a frozen layout of the live graph: factor slots laid out
contiguously (one slot per edge, in each factor's edge order), a
per-variable gather order sorted by edge id (fixing the floating-point
reduction order regardless of thread count), and static per-thread work
queues. Removal-only edit batches just flip alive masks; any structural
addition or re-parameterization syncs state back to the graph and
compiles a fresh epoch, which also rebuilds the queues. When more than
half the slots are dead the epoch recompacts for the same reason.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from ._kernels import K_EMITTER, KIND_CODES
from .errors import CertaintyConflict, InfeasibleCertainty
from .graph_core import (
    AddEdge,
    AddFactor,
    AddVariable,
    EditReport,
    FactorGraph,
    RemoveEdge,
    RemoveFactor,
    Reparameterize,
)
from .twa_engine import EngineConfig, EditTicket, schedule

_ARITY = {"box": 2, "pair": 4}


@dataclass
class Epoch:
    # factor side
    f_ids: np.ndarray
    f_kind: np.ndarray
    f_ptr: np.ndarray
    f_alive: np.ndarray
    f_live_slots: np.ndarray
    f_pinned: np.ndarray
    f_radius: np.ndarray
    f_dirx: np.ndarray
    f_diry: np.ndarray
    infeasible: np.ndarray
    # slot (edge) side
    s_edge: np.ndarray
    s_var: np.ndarray
    s_alive: np.ndarray
    e_n: np.ndarray
    e_prev: np.ndarray
    e_m: np.ndarray
    e_x: np.ndarray
    e_u: np.ndarray
    e_wnf: np.ndarray
    e_wmv: np.ndarray
    # variable side
    v_ids: np.ndarray
    v_ptr: np.ndarray
    v_slots: np.ndarray
    v_z: np.ndarray
    v_wout: np.ndarray
    v_certain: np.ndarray
    v_alive: np.ndarray
    conflict: np.ndarray
    # id translation
    var_index: dict[int, int]
    factor_index: dict[int, int]
    edge_slot: dict[int, int]
    var_lookup: np.ndarray
    # emitter factors are replayed in Python: factor index -> (values, weights)
    emitters: dict[int, tuple[np.ndarray, np.ndarray]]
    # static work partition
    f_queues: list[np.ndarray]
    v_queues: list[np.ndarray]
    # per-thread reduction buffers
    max_out: list[np.ndarray]
    newly: list[np.ndarray]
    newly_count: list[np.ndarray]
    # live bookkeeping
    live_variables: int
    live_factors: int
    live_edges: int
    total_slots: int


def compile_epoch(graph: FactorGraph, config: EngineConfig) -> Epoch:
    factor_ids = [fid for fid in sorted(graph.factors) if graph.factors[fid].edges]
    nF = len(factor_ids)
    nE = sum(len(graph.factors[fid].edges) for fid in factor_ids)
    var_ids = sorted(graph.variables)
    nV = len(var_ids)

    f_ids = np.asarray(factor_ids, dtype=np.int64)
    f_kind = np.zeros(nF, dtype=np.int8)
    f_ptr = np.zeros(nF + 1, dtype=np.int64)
    f_pinned = np.zeros(nF, dtype=np.uint8)
    f_radius = np.zeros(nF, dtype=np.float64)
    f_dirx = np.ones(nF, dtype=np.float64)
    f_diry = np.zeros(nF, dtype=np.float64)

    var_index = {vid: i for i, vid in enumerate(var_ids)}
    factor_index = {fid: i for i, fid in enumerate(factor_ids)}
    edge_slot: dict[int, int] = {}

    s_edge = np.zeros(nE, dtype=np.int64)
    s_var = np.zeros(nE, dtype=np.int64)
    e_n = np.zeros(nE, dtype=np.float64)
    e_prev = np.zeros(nE, dtype=np.float64)
    e_m = np.zeros(nE, dtype=np.float64)
    e_x = np.zeros(nE, dtype=np.float64)
    e_u = np.zeros(nE, dtype=np.float64)
    e_wnf = np.zeros(nE, dtype=np.float64)
    e_wmv = np.zeros(nE, dtype=np.float64)

    emitters: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    slot = 0
    for fi, fid in enumerate(factor_ids):
        fac = graph.factors[fid]
        try:
            f_kind[fi] = KIND_CODES[fac.kind]
        except KeyError:
            raise ValueError(
                f"factor kind {fac.kind!r} is not supported by the compiled engine"
            ) from None
        arity = _ARITY.get(fac.kind)
        if arity is not None and len(fac.edges) != arity:
            raise ValueError(
                f"factor {fid} of kind {fac.kind!r} needs {arity} edges, has {len(fac.edges)}"
            )
        f_ptr[fi] = slot
        if fac.kind == "one_on":
            f_pinned[fi] = 1 if fac.params.get("pinned_on") else 0
        elif fac.kind in ("box", "pair"):
            f_radius[fi] = float(fac.params["radius"])
            if fac.kind == "pair":
                f_dirx[fi] = float(fac.params.get("dirx", 1.0))
                f_diry[fi] = float(fac.params.get("diry", 0.0))
        elif fac.kind == "emitter":
            emitters[fi] = _emitter_arrays(fac.params, len(fac.edges))
        for eid in fac.edges:
            st = graph.edges[eid].state
            s_edge[slot] = eid
            s_var[slot] = var_index[graph.edges[eid].variable]
            e_n[slot] = st.msg_to_factor
            e_prev[slot] = st.prev_msg_to_factor
            e_m[slot] = st.msg_to_variable
            e_x[slot] = st.msg_to_factor
            e_u[slot] = st.error_accum
            e_wnf[slot] = st.weight_to_factor
            e_wmv[slot] = st.weight_to_variable
            edge_slot[eid] = slot
            slot += 1
        f_ptr[fi + 1] = slot

    # Concur gathers each variable's slots in edge-id order so the
    # reduction order never depends on factor layout or thread count.
    per_var: list[list[tuple[int, int]]] = [[] for _ in range(nV)]
    for s in range(nE):
        per_var[s_var[s]].append((int(s_edge[s]), s))
    v_ptr = np.zeros(nV + 1, dtype=np.int64)
    v_slots = np.zeros(nE, dtype=np.int64)
    pos = 0
    for vi in range(nV):
        per_var[vi].sort()
        v_ptr[vi] = pos
        for _, s in per_var[vi]:
            v_slots[pos] = s
            pos += 1
    v_ptr[nV] = pos

    v_z = np.zeros(nV, dtype=np.float64)
    v_wout = np.zeros(nV, dtype=np.float64)
    v_certain = np.zeros(nV, dtype=np.uint8)
    for vi, vid in enumerate(var_ids):
        var = graph.variables[vid]
        v_z[vi] = var.concurred
        v_wout[vi] = var.out_weight
        v_certain[vi] = 1 if var.certain else 0

    var_lookup = np.full(max(graph._next_variable, 1), -1, dtype=np.int64)
    for vid, vi in var_index.items():
        var_lookup[vid] = vi

    T = config.thread_count
    kernel_factors = [(fi, int(f_ptr[fi + 1] - f_ptr[fi])) for fi in range(nF)
                      if f_kind[fi] != K_EMITTER]
    f_queues = [np.asarray(q, dtype=np.int64) for q in schedule(kernel_factors, T)]
    var_costs = [(vi, int(v_ptr[vi + 1] - v_ptr[vi])) for vi in range(nV)]
    v_queues = [np.asarray(q, dtype=np.int64) for q in schedule(var_costs, T)]

    return Epoch(
        f_ids=f_ids,
        f_kind=f_kind,
        f_ptr=f_ptr,
        f_alive=np.ones(nF, dtype=np.uint8),
        f_live_slots=np.diff(f_ptr).astype(np.int64),
        f_pinned=f_pinned,
        f_radius=f_radius,
        f_dirx=f_dirx,
        f_diry=f_diry,
        infeasible=np.zeros(nF, dtype=np.uint8),
        s_edge=s_edge,
        s_var=s_var,
        s_alive=np.ones(nE, dtype=np.uint8),
        e_n=e_n,
        e_prev=e_prev,
        e_m=e_m,
        e_x=e_x,
        e_u=e_u,
        e_wnf=e_wnf,
        e_wmv=e_wmv,
        v_ids=np.asarray(var_ids, dtype=np.int64),
        v_ptr=v_ptr,
        v_slots=v_slots,
        v_z=v_z,
        v_wout=v_wout,
        v_certain=v_certain,
        v_alive=np.ones(nV, dtype=np.uint8),
        conflict=np.zeros(nV, dtype=np.uint8),
        var_index=var_index,
        factor_index=factor_index,
        edge_slot=edge_slot,
        var_lookup=var_lookup,
        emitters=emitters,
        f_queues=f_queues,
        v_queues=v_queues,
        max_out=[np.zeros(1, dtype=np.float64) for _ in range(T)],
        newly=[np.zeros(max(nV, 1), dtype=np.int64) for _ in range(T)],
        newly_count=[np.zeros(1, dtype=np.int64) for _ in range(T)],
        live_variables=nV,
        live_factors=nF,
        live_edges=nE,
        total_slots=nE,
    )


def _emitter_arrays(params: dict[str, Any], arity: int) -> tuple[np.ndarray, np.ndarray]:
    values = np.zeros(arity, dtype=np.float64)
    weights = np.zeros(arity, dtype=np.float64)
    pv = params.get("values", ())
    pw = params.get("weights", ())
    for i in range(min(arity, len(pv))):
        values[i] = float(pv[i])
    for i in range(min(arity, len(pw))):
        weights[i] = float(pw[i])
    return values, weights


def run_minimize(epoch: Epoch, config: EngineConfig, pool, iteration: int) -> None:
    # Emitter factors replay externally chosen messages; there are few of
    # them, so plain Python is fine and keeps the kernels branch-light.
    for fi, (values, weights) in epoch.emitters.items():
        if epoch.f_alive[fi] == 0:
            continue
        p0 = int(epoch.f_ptr[fi])
        for k in range(values.shape[0]):
            s = p0 + k
            if epoch.s_alive[s] == 0:
                continue
            x = values[k]
            w = weights[k]
            epoch.e_x[s] = x
            epoch.e_wmv[s] = w
            if 0.0 < w < np.inf:
                epoch.e_m[s] = x + epoch.e_u[s]
            else:
                epoch.e_m[s] = x

    args = lambda q: (  # noqa: E731
        q, epoch.f_kind, epoch.f_ptr, epoch.f_alive, epoch.f_pinned,
        epoch.f_radius, epoch.f_dirx, epoch.f_diry, epoch.s_alive,
        epoch.e_n, epoch.e_wnf, epoch.e_x, epoch.e_m, epoch.e_u,
        epoch.e_wmv, config.rho_standard, epoch.infeasible,
    )
    if pool is None:
        _kernels.minimize_kernel(*args(epoch.f_queues[0]))
    else:
        futures = [pool.submit(_kernels.minimize_kernel, *args(q))
                   for q in epoch.f_queues if q.shape[0]]
        for fut in futures:
            fut.result()
    if epoch.infeasible.any():
        fi = int(np.flatnonzero(epoch.infeasible)[0])
        raise InfeasibleCertainty(
            "conflicting certain inputs make a hard constraint unsatisfiable",
            factor_id=int(epoch.f_ids[fi]),
            iteration=iteration,
        )


def run_concur(epoch: Epoch, config: EngineConfig, pool, iteration: int) -> tuple[float, list[int]]:
    args = lambda q, t: (  # noqa: E731
        q, epoch.v_ptr, epoch.v_slots, epoch.v_z, epoch.v_wout,
        epoch.v_certain, epoch.v_alive, epoch.s_alive, epoch.e_m,
        epoch.e_wmv, epoch.e_x, epoch.e_u, epoch.e_n, epoch.e_prev,
        epoch.e_wnf, config.rho_standard, config.epsilon_convergence,
        epoch.conflict, epoch.max_out[t], epoch.newly[t], epoch.newly_count[t],
    )
    if pool is None:
        _kernels.concur_kernel(*args(epoch.v_queues[0], 0))
        used = [0]
    else:
        futures = []
        used = []
        for t, q in enumerate(epoch.v_queues):
            if q.shape[0]:
                futures.append(pool.submit(_kernels.concur_kernel, *args(q, t)))
                used.append(t)
        for fut in futures:
            fut.result()
    if epoch.conflict.any():
        vi = int(np.flatnonzero(epoch.conflict)[0])
        raise CertaintyConflict(
            "certain opinions about a variable disagree",
            variable_id=int(epoch.v_ids[vi]),
            iteration=iteration,
        )
    max_delta = 0.0
    newly: list[int] = []
    for t in used:
        if epoch.max_out[t][0] > max_delta:
            max_delta = float(epoch.max_out[t][0])
        cnt = int(epoch.newly_count[t][0])
        if cnt:
            newly.extend(int(v) for v in epoch.newly[t][:cnt])
        epoch.max_out[t][0] = 0.0
        epoch.newly_count[t][0] = 0
    newly.sort()
    return max_delta, newly


def sync_graph(epoch: Epoch, graph: FactorGraph) -> None:
    """Write epoch state back into the graph's nodes and edges."""
    for vi in range(epoch.v_ids.shape[0]):
        if epoch.v_alive[vi] == 0:
            continue
        var = graph.variables.get(int(epoch.v_ids[vi]))
        if var is None:
            continue
        var.concurred = float(epoch.v_z[vi])
        var.out_weight = float(epoch.v_wout[vi])
        var.certain = bool(epoch.v_certain[vi])
    for s in range(epoch.total_slots):
        if epoch.s_alive[s] == 0:
            continue
        edge = graph.edges.get(int(epoch.s_edge[s]))
        if edge is None:
            continue
        st = edge.state
        st.msg_to_factor = float(epoch.e_n[s])
        st.prev_msg_to_factor = float(epoch.e_prev[s])
        st.msg_to_variable = float(epoch.e_m[s])
        st.error_accum = float(epoch.e_u[s])
        st.weight_to_factor = float(epoch.e_wnf[s])
        st.weight_to_variable = float(epoch.e_wmv[s])


def apply_boundary_edits(
    epoch: Epoch,
    graph: FactorGraph,
    config: EngineConfig,
    tickets: list[EditTicket],
) -> tuple[Epoch, EditReport]:
    """Apply queued edits to the graph, then bring the epoch up to date.

    Removal-only batches flip alive masks in place (recompacting once
    more than half the slots are dead). Batches that only re-parameterize
    emitter factors update the replay tables. Anything else writes state
    back and compiles a fresh epoch.
    """
    edits = [t.edit for t in tickets]
    removal_only = all(isinstance(e, (RemoveEdge, RemoveFactor)) for e in edits)
    emitter_reparam_only = all(
        isinstance(e, Reparameterize)
        and e.factor in graph.factors
        and graph.factors[e.factor].kind == "emitter"
        for e in edits
    ) if edits else False

    removed_factor_ids = [e.factor for e in edits if isinstance(e, RemoveFactor)]
    direct_removed_edges = [e.edge for e in edits if isinstance(e, RemoveEdge)]

    if not removal_only and not emitter_reparam_only:
        # additions seed new edges from variable state, so write it back first
        sync_graph(epoch, graph)

    report = graph.apply_edits(edits)

    # Hand fresh ids back to whoever queued the additions.
    new_vars = iter(report.new_variables)
    new_factors = iter(report.new_factors)
    new_edges = iter(report.new_edges)
    for ticket in tickets:
        e = ticket.edit
        if isinstance(e, AddVariable):
            ticket.new_id = next(new_vars)
        elif isinstance(e, AddFactor):
            ticket.new_id = next(new_factors)
            ticket.new_edge_ids = tuple(next(new_edges) for _ in e.variables)
        elif isinstance(e, AddEdge):
            ticket.new_id = next(new_edges)

    if removal_only:
        for eid in direct_removed_edges + report.pruned_edges:
            s = epoch.edge_slot.get(eid)
            if s is None or epoch.s_alive[s] == 0:
                continue
            epoch.s_alive[s] = 0
            epoch.live_edges -= 1
            fi = _slot_factor(epoch, s)
            epoch.f_live_slots[fi] -= 1
            if epoch.f_live_slots[fi] == 0 and epoch.f_alive[fi] == 1:
                epoch.f_alive[fi] = 0
                epoch.live_factors -= 1
                epoch.emitters.pop(fi, None)
        for fid in removed_factor_ids:
            fi = epoch.factor_index.get(fid)
            if fi is not None and epoch.f_alive[fi] == 1:
                epoch.f_alive[fi] = 0
                epoch.live_factors -= 1
                epoch.emitters.pop(fi, None)
        for vid in report.pruned_variables:
            vi = epoch.var_index.get(vid)
            if vi is not None and epoch.v_alive[vi] == 1:
                epoch.v_alive[vi] = 0
                epoch.live_variables -= 1
        if epoch.live_edges * 2 < epoch.total_slots:
            sync_graph(epoch, graph)
            epoch = compile_epoch(graph, config)
        return epoch, report

    if emitter_reparam_only:
        for e in edits:
            fi = epoch.factor_index[e.factor]
            arity = int(epoch.f_ptr[fi + 1] - epoch.f_ptr[fi])
            epoch.emitters[fi] = _emitter_arrays(graph.factors[e.factor].params, arity)
        return epoch, report

    return compile_epoch(graph, config), report


def _slot_factor(epoch: Epoch, s: int) -> int:
    fi = int(np.searchsorted(epoch.f_ptr, s, side="right")) - 1
    return fi
