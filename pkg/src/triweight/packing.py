"""Circle packing: congruent circles in the unit square.

Each circle carries two coordinate variables. A box factor per circle
keeps it inside [r, 1-r]^2, and a pair factor per *nearby* pair keeps
centers at least 2r apart. Both constraints are one-sided: while
satisfied they echo their inputs with zero weight and perturb nothing.

Pair factors are managed dynamically. A maintenance reasoner keeps a
bounding-box index of buffered circle footprints, adds a pair factor
when two footprints start to overlap, and detaches (not destroys) the
factor when they separate again: detached factors park in a pool with
zero edges and are re-parameterized for the next pair that shows up,
so steady state allocates nothing.

Drag and transport reasoners cover interactive steering: both attach an
emitter factor to a circle's variables on demand (cursor position while
held; a vacancy target for a fixed burst) and detach it after, leaving
no trace in the graph.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InfeasibleCertainty, InfeasibleRadius, UnknownCircle
from .graph_core import (
    AddEdge,
    AddFactor,
    FactorGraph,
    KindMismatch,
    RemoveEdge,
    RemoveFactor,
    Reparameterize,
    Weight,
    register_kind_validator,
)
from .rtree import Aabb, RTree
from .twa_engine import (
    EngineConfig,
    EditTicket,
    GlobalContext,
    GlobalReasoner,
    IterationStatus,
    register_minimizer,
    run,
)

HEX_DENSITY_BOUND = 0.9069  # hexagonal packing density, not beatable


@dataclass(frozen=True)
class PackingInstance:
    """Problem parameters: n congruent circles of the given radius in [0,1]^2."""

    n_circles: int
    radius: float
    buffer_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.n_circles < 1:
            raise ValueError(f"need at least one circle, got {self.n_circles}")
        if not (0.0 < self.radius < 0.5):
            raise ValueError(f"radius must be in (0, 0.5), got {self.radius}")
        if self.buffer_fraction < 0.0:
            raise ValueError(f"buffer fraction must be >= 0, got {self.buffer_fraction}")
        d = density(self.n_circles, self.radius)
        if d > HEX_DENSITY_BOUND:
            raise InfeasibleRadius(
                f"total circle area {d:.4f} exceeds the packable bound {HEX_DENSITY_BOUND}"
            )


def density(n: int, radius: float) -> float:
    """Fraction of the unit square covered when nothing overlaps."""
    return n * math.pi * radius * radius


def radius_for_density(n: int, target: float) -> float:
    return math.sqrt(target / (n * math.pi))


@dataclass
class CircleVars:
    """Bijection circle id <-> (x variable, y variable)."""

    x_of: dict[int, int] = field(default_factory=dict)
    y_of: dict[int, int] = field(default_factory=dict)
    circle_of: dict[int, tuple[int, int]] = field(default_factory=dict)  # vid -> (circle, axis)

    def add(self, circle: int, x_vid: int, y_vid: int) -> None:
        self.x_of[circle] = x_vid
        self.y_of[circle] = y_vid
        self.circle_of[x_vid] = (circle, 0)
        self.circle_of[y_vid] = (circle, 1)

    @property
    def n(self) -> int:
        return len(self.x_of)


@dataclass(frozen=True)
class OverlapReport:
    """Worst-penetrated circle and its penetration depth (0 when feasible)."""

    circle: int
    depth: float


# --- factor kinds ---------------------------------------------------------


def _box_params_ok(params: dict) -> None:
    r = params.get("radius")
    if not isinstance(r, float) or not (0.0 < r < 0.5):
        raise KindMismatch(f"box factor needs radius in (0, 0.5), got {r!r}")


def _pair_params_ok(params: dict) -> None:
    r = params.get("radius")
    if not isinstance(r, float) or not (0.0 < r < 0.5):
        raise KindMismatch(f"pair factor needs radius in (0, 0.5), got {r!r}")
    for key in ("dirx", "diry"):
        v = params.get(key, 0.0)
        if not isinstance(v, float) or not math.isfinite(v):
            raise KindMismatch(f"pair factor {key} must be finite, got {v!r}")


register_kind_validator("box", _box_params_ok)
register_kind_validator("pair", _pair_params_ok)


def box_minimize(
    incoming: Sequence[tuple[float, float]], radius: float, rho: float = 1.0
) -> list[tuple[float, float]]:
    """Keep a center inside [r, 1-r] per coordinate.

    Satisfied coordinates echo with zero weight; violated ones come back
    clamped at standard weight.
    """
    lo, hi = radius, 1.0 - radius
    out = []
    for n, _w in incoming:
        if n < lo:
            out.append((lo, rho))
        elif n > hi:
            out.append((hi, rho))
        else:
            out.append((n, Weight.ZERO))
    return out


def pair_minimize(
    incoming: Sequence[tuple[float, float]],
    radius: float,
    rho: float = 1.0,
    direction: tuple[float, float] = (1.0, 0.0),
) -> list[tuple[float, float]]:
    """Keep two centers at least 2r apart.

    Separated pairs echo with zero weight. Overlapping pairs are pushed
    to exactly 2r along the center line, the displacement split inversely
    to the per-circle incoming weight (an infinitely weighted circle does
    not move; two of them closer than 2r is a contradiction). Coincident
    centers separate along the seeded direction.
    """
    (xi, wxi), (yi, wyi), (xj, wxj), (yj, wyj) = incoming
    dx = xj - xi
    dy = yj - yi
    d = math.sqrt(dx * dx + dy * dy)
    if d >= 2.0 * radius:
        return [(xi, Weight.ZERO), (yi, Weight.ZERO), (xj, Weight.ZERO), (yj, Weight.ZERO)]
    wi = max(wxi, wyi)
    wj = max(wxj, wyj)
    if Weight.is_infinite(wi) and Weight.is_infinite(wj):
        raise InfeasibleCertainty("two circles pinned with certainty closer than 2r")
    if Weight.is_infinite(wi):
        ai, aj = 0.0, 1.0
    elif Weight.is_infinite(wj):
        ai, aj = 1.0, 0.0
    elif wi == 0.0 and wj == 0.0:
        ai = aj = 0.5
    else:
        ai = wj / (wi + wj)
        aj = wi / (wi + wj)
    if d > 1e-12:
        ux = dx / d
        uy = dy / d
    else:
        ux, uy = direction
    gap = 2.0 * radius - d
    return [
        (xi - ai * gap * ux, rho),
        (yi - ai * gap * uy, rho),
        (xj + aj * gap * ux, rho),
        (yj + aj * gap * uy, rho),
    ]


def _box_registered(params, incoming, rho):
    return box_minimize(incoming, params["radius"], rho)


def _pair_registered(params, incoming, rho):
    direction = (params.get("dirx", 1.0), params.get("diry", 0.0))
    return pair_minimize(incoming, params["radius"], rho, direction)


register_minimizer("box", _box_registered)
register_minimizer("pair", _pair_registered)


# --- instance construction ------------------------------------------------


def build_instance(
    n: int, radius: float, seed: int = 0, buffer_fraction: float = 0.05
) -> tuple[FactorGraph, CircleVars]:
    """Fresh graph: 2n coordinate variables and n box factors, no pairs yet.

    Positions start uniform in [r, 1-r]^2 under the given seed; pair
    factors appear later through the maintenance reasoner.
    """
    PackingInstance(n, radius, buffer_fraction)  # validates, including the density bound
    rng = np.random.default_rng(seed)
    graph = FactorGraph()
    cvars = CircleVars()
    lo, hi = radius, 1.0 - radius
    for circle in range(n):
        x = graph.add_variable(initial_value=float(rng.uniform(lo, hi)))
        y = graph.add_variable(initial_value=float(rng.uniform(lo, hi)))
        graph.add_factor("box", {"radius": radius}, (x, y))
        cvars.add(circle, x, y)
    graph.initialized = True
    return graph, cvars


# --- overlap measurement --------------------------------------------------


def max_overlap(x: np.ndarray, y: np.ndarray, radius: float, tree: RTree) -> OverlapReport:
    """Circle with the deepest pairwise penetration; depth 0 when feasible.

    Candidate pairs come from the index, which is sound as long as its
    boxes cover the circles (buffered boxes do).
    """
    worst_depth = 0.0
    worst_circle = 0
    for a, b in sorted(tree.query_pairs()):
        d = math.hypot(x[a] - x[b], y[a] - y[b])
        depth = 2.0 * radius - d
        if depth > worst_depth:
            worst_depth = depth
            worst_circle = a if x[a] <= x[b] else b
    return OverlapReport(circle=worst_circle, depth=max(worst_depth, 0.0))


def check_feasible(
    x: np.ndarray,
    y: np.ndarray,
    radius: float,
    overlap_tol: float = 1e-6,
    box_tol: float = 1e-9,
) -> tuple[bool, float, float]:
    """Brute-force feasibility: (ok, worst overlap, worst box violation)."""
    n = len(x)
    worst_overlap = 0.0
    for i in range(n):
        dx = x[i + 1 :] - x[i]
        dy = y[i + 1 :] - y[i]
        if len(dx):
            d = np.sqrt(dx * dx + dy * dy)
            pen = 2.0 * radius - float(d.min())
            worst_overlap = max(worst_overlap, pen)
    lo, hi = radius, 1.0 - radius
    worst_box = 0.0
    for arr in (x, y):
        worst_box = max(worst_box, float(np.max(lo - arr, initial=0.0)))
        worst_box = max(worst_box, float(np.max(arr - hi, initial=0.0)))
    ok = worst_overlap <= overlap_tol and worst_box <= box_tol
    return ok, max(worst_overlap, 0.0), worst_box


# --- dynamic pair maintenance ---------------------------------------------


@dataclass
class TelemetryRow:
    iteration: int
    max_overlap_depth: float
    active_factors: int
    pool_size: int


class MaintenanceReasoner(GlobalReasoner):
    """Keeps the pair-factor set equal to the currently-near pairs.

    Each iteration: refresh the index with every circle's buffered box,
    query intersecting pairs, add factors for pairs that appeared (pool
    first, fresh factors only when the pool is dry), and detach factors
    for pairs that separated, parking them in the pool.
    """

    name = "maintenance"

    def __init__(self, instance: PackingInstance, cvars: CircleVars, rng_seed: int = 0):
        self.instance = instance
        self.cvars = cvars
        self.tree = RTree()
        self.pool: list[int] = []
        self.active: dict[tuple[int, int], int] = {}
        self.created = 0
        self.peak_active = 0
        self.last_report = OverlapReport(circle=0, depth=0.0)
        self.telemetry: list[TelemetryRow] = []
        self._pending: list[tuple[tuple[int, int], EditTicket]] = []
        self._rng = np.random.default_rng((rng_seed, 0x9A1))
        circles = sorted(cvars.x_of)
        self._x_vids = np.asarray([cvars.x_of[c] for c in circles], dtype=np.int64)
        self._y_vids = np.asarray([cvars.y_of[c] for c in circles], dtype=np.int64)
        self.x = np.zeros(len(circles))
        self.y = np.zeros(len(circles))

    def reason(self, ctx: GlobalContext) -> None:
        for pair, ticket in self._pending:
            if ticket.new_id is None:
                raise RuntimeError("pair factor ticket left unresolved")
            self.active[pair] = ticket.new_id
        self._pending.clear()

        self.x = ctx.gather(self._x_vids)
        self.y = ctx.gather(self._y_vids)
        r = self.instance.radius
        half = r + self.instance.buffer_fraction * 2.0 * r  # each side pushed out
        for c in range(len(self.x)):
            cx, cy = float(self.x[c]), float(self.y[c])
            self.tree.upsert(c, Aabb(cx - half, cy - half, cx + half, cy + half))

        pairs = self.tree.query_pairs()
        report = max_overlap(self.x, self.y, r, self.tree)
        self.last_report = report

        for pair in sorted(pairs - self.active.keys()):
            a, b = pair
            members = (
                self.cvars.x_of[a],
                self.cvars.y_of[a],
                self.cvars.x_of[b],
                self.cvars.y_of[b],
            )
            angle = float(self._rng.uniform(0.0, 2.0 * math.pi))
            params = {
                "radius": r,
                "dirx": math.cos(angle),
                "diry": math.sin(angle),
            }
            if self.pool:
                fid = self.pool.pop()
                ctx.queue_edit(Reparameterize(fid, params))
                for vid in members:
                    ctx.queue_edit(AddEdge(fid, vid))
                self.active[pair] = fid
            else:
                ticket = ctx.queue_edit(AddFactor("pair", params, members))
                self._pending.append((pair, ticket))
                self.created += 1

        for pair in sorted(self.active.keys() - pairs):
            fid = self.active.pop(pair)
            factor = ctx.graph.factors[fid]
            for eid in list(factor.edges):
                ctx.queue_edit(RemoveEdge(eid))
            self.pool.append(fid)

        active_now = len(self.active) + len(self._pending)
        self.peak_active = max(self.peak_active, active_now)
        self.telemetry.append(
            TelemetryRow(
                iteration=ctx.iteration,
                max_overlap_depth=report.depth,
                active_factors=active_now,
                pool_size=len(self.pool),
            )
        )


# --- steering reasoners ---------------------------------------------------


class DragReasoner(GlobalReasoner):
    """Streams a held cursor at a circle through an on-demand emitter.

    While a drag is active the emitter factor sends the cursor position
    to the circle's coordinate variables at standard weight every
    iteration; release removes the factor. Idle, this reasoner queues
    nothing and the run is byte-identical to one without it.
    """

    name = "drag"

    def __init__(self, cvars: CircleVars):
        self.cvars = cvars
        self.weight: float | None = None  # None: the engine's standard rho
        self._target: int | None = None
        self._cursor: tuple[float, float] | None = None
        self._dirty = False
        self._factor: int | None = None
        self._factor_circle: int | None = None
        self._ticket: EditTicket | None = None

    def press(self, circle: int, x: float, y: float) -> None:
        if circle not in self.cvars.x_of:
            raise UnknownCircle(f"no circle {circle}")
        self._target = circle
        self._cursor = (x, y)
        self._dirty = True

    def move(self, x: float, y: float) -> None:
        if self._target is None:
            return
        self._cursor = (x, y)
        self._dirty = True

    def release(self) -> None:
        self._target = None
        self._dirty = True

    @property
    def active(self) -> bool:
        return self._target is not None

    def reason(self, ctx: GlobalContext) -> None:
        if self._ticket is not None and self._ticket.new_id is not None:
            self._factor = self._ticket.new_id
            self._ticket = None
        if self._factor is not None and self._factor_circle != self._target:
            # released, or grabbed a different circle: drop the old emitter
            ctx.queue_edit(RemoveFactor(self._factor))
            self._factor = None
            self._factor_circle = None
        if self._target is None:
            return
        cx, cy = self._cursor  # type: ignore[misc]
        rho = self.weight if self.weight is not None else ctx.config.rho_standard
        params = {"values": [cx, cy], "weights": [rho, rho]}
        if self._factor is None:
            if self._ticket is None:
                members = (self.cvars.x_of[self._target], self.cvars.y_of[self._target])
                self._ticket = ctx.queue_edit(AddFactor("emitter", params, members))
                self._factor_circle = self._target
        else:
            # reparameterized every held iteration, moved or not: a live grab
            # must keep the run from declaring convergence under the cursor
            ctx.queue_edit(Reparameterize(self._factor, params))
        self._dirty = False


class TransportReasoner(GlobalReasoner):
    """Carries a distressed circle toward a vacancy for a fixed burst.

    Triggering picks the worst-overlap circle (or an explicit one) and
    attaches an emitter at the vacancy point; after burst_iterations the
    emitter is removed and the constraints take over again.
    """

    name = "transport"

    def __init__(
        self, cvars: CircleVars, maintenance: MaintenanceReasoner, burst_iterations: int = 25
    ):
        self.cvars = cvars
        self.maintenance = maintenance
        self.burst_iterations = burst_iterations
        self._request: tuple[float, float, int | None] | None = None
        self._remaining = 0
        self._factor: int | None = None
        self._ticket: EditTicket | None = None
        self._params: dict | None = None
        self.carried: int | None = None

    def trigger(self, x: float, y: float, circle: int | None = None) -> None:
        if circle is not None and circle not in self.cvars.x_of:
            raise UnknownCircle(f"no circle {circle}")
        self._request = (x, y, circle)

    @property
    def active(self) -> bool:
        return self._remaining > 0 or self._request is not None

    def reason(self, ctx: GlobalContext) -> None:
        if self._ticket is not None and self._ticket.new_id is not None:
            self._factor = self._ticket.new_id
            self._ticket = None
        if self._request is not None:
            x, y, circle = self._request
            self._request = None
            if circle is None:
                report = max_overlap(
                    self.maintenance.x,
                    self.maintenance.y,
                    self.maintenance.instance.radius,
                    self.maintenance.tree,
                )
                circle = report.circle
            self.carried = circle
            rho = ctx.config.rho_standard
            members = (self.cvars.x_of[circle], self.cvars.y_of[circle])
            self._params = {"values": [x, y], "weights": [rho, rho]}
            if self._factor is not None:  # retarget an in-flight burst
                ctx.queue_edit(RemoveFactor(self._factor))
                self._factor = None
            self._ticket = ctx.queue_edit(AddFactor("emitter", self._params, members))
            self._remaining = self.burst_iterations
            return
        if self._remaining > 0:
            self._remaining -= 1
            if self._remaining == 0:
                if self._factor is not None:
                    ctx.queue_edit(RemoveFactor(self._factor))
                    self._factor = None
                self.carried = None
            elif self._factor is not None:
                # keep-alive: the emitter is scheduled to go away, so the run
                # must not converge around it mid-burst
                ctx.queue_edit(Reparameterize(self._factor, self._params))


# --- the packing runner ---------------------------------------------------


@dataclass
class PackingResult:
    x: np.ndarray
    y: np.ndarray
    iterations: int
    converged: bool
    feasible: bool
    max_overlap_depth: float
    max_box_violation: float
    peak_active_factors: int
    pool_size: int
    factors_created: int
    telemetry: list[TelemetryRow]
    solve_ms: float


def pack(
    n: int,
    radius: float,
    seed: int = 0,
    config: EngineConfig | None = None,
    buffer_fraction: float = 0.05,
    extra_globals: Sequence[GlobalReasoner] = (),
    on_status: Callable[[IterationStatus, MaintenanceReasoner], None] | None = None,
) -> PackingResult:
    """Pack n circles of the given radius; runs until convergence or budget.

    Coordinates converge to 1e-6 by default (geometric feasibility needs
    the tight epsilon). extra_globals run after maintenance each
    iteration; on_status sees every iteration for streaming callers.
    """
    if config is None:
        config = EngineConfig(
            epsilon_convergence=1e-6, max_iterations=5000, rng_seed=seed
        )
    t0 = time.perf_counter()
    instance = PackingInstance(n, radius, buffer_fraction)
    graph, cvars = build_instance(n, radius, seed=seed, buffer_fraction=buffer_fraction)
    maintenance = MaintenanceReasoner(instance, cvars, rng_seed=config.rng_seed)
    reasoners: list[GlobalReasoner] = [maintenance, *extra_globals]

    iterations = 0
    converged = False
    for status in run(graph, config, (), reasoners):
        iterations = status.iteration
        converged = status.converged
        if on_status is not None:
            on_status(status, maintenance)

    xs = np.array([graph.variables[cvars.x_of[c]].concurred for c in sorted(cvars.x_of)])
    ys = np.array([graph.variables[cvars.y_of[c]].concurred for c in sorted(cvars.y_of)])
    # report the box-side iterate: the wall is exactly projectable, so the
    # answer satisfies it by construction and any residual the projection
    # shifts around shows up in the recomputed pair depths instead
    xs = np.clip(xs, radius, 1.0 - radius)
    ys = np.clip(ys, radius, 1.0 - radius)
    ok, worst_overlap, worst_box = check_feasible(xs, ys, radius)
    return PackingResult(
        x=xs,
        y=ys,
        iterations=iterations,
        converged=converged,
        feasible=ok,
        max_overlap_depth=worst_overlap,
        max_box_violation=worst_box,
        peak_active_factors=maintenance.peak_active,
        pool_size=len(maintenance.pool),
        factors_created=maintenance.created,
        telemetry=maintenance.telemetry,
        solve_ms=(time.perf_counter() - t0) * 1e3,
    )


# --- output format --------------------------------------------------------


def format_packing(n: int, radius: float, x: np.ndarray, y: np.ndarray) -> str:
    """Header plus one id,x,y line per circle, 15 decimal places."""
    lines = [f"n={n} r={radius:.15f} density={density(n, radius):.15f}"]
    for i in range(n):
        lines.append(f"{i},{x[i]:.15f},{y[i]:.15f}")
    return "\n".join(lines) + "\n"


def parse_packing(text: str) -> tuple[int, float, np.ndarray, np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = dict(part.split("=", 1) for part in lines[0].split())
    n = int(head["n"])
    radius = float(head["r"])
    x = np.zeros(n)
    y = np.zeros(n)
    for ln in lines[1:]:
        i_s, x_s, y_s = ln.split(",")
        x[int(i_s)] = float(x_s)
        y[int(i_s)] = float(y_s)
    return n, radius, x, y
