"""N-by-N Sudoku as a factor graph of binary indicators.

Each open cell's still-possible digit d gets one indicator variable
v(row, col, d) that should end at 1 when the digit is placed there.
Four families of exactly-one-on constraints tie them together: per cell
(one digit), and per row, column, and region (each digit once). Clues
never enter the graph: the clue cell's variables are omitted and every
possibility a clue directly contradicts is dropped at build time, so the
graph holds open possibilities only.

Solving then runs in two phases that share one engine loop: certain
(infinite-weight) messages cascade pure logical deduction first, and
whatever remains is searched numerically by ordinary weighted message
passing. A possibility reasoner reports each digit that becomes
certainly impossible; a pruning reasoner turns those reports into edge
removals, drops forced factors, and lets variable pruning shrink the
graph as knowledge accumulates; a detection reasoner halts as soon as a
rule-valid grid can be read off.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    CertaintyConflict,
    Inconsistent,
    InfeasibleCertainty,
    InvalidPuzzle,
    MultipleSolutions,
    NoSolution,
    PuzzleSyntaxError,
    Unsolved,
)
from .graph_core import FactorGraph, RemoveEdge, RemoveFactor, Weight
from .twa_engine import (
    EngineConfig,
    GlobalContext,
    GlobalReasoner,
    IterationStatus,
    LocalReasoner,
    LocalView,
    register_minimizer,
    run,
)

# --- puzzle model ---------------------------------------------------------


@dataclass(frozen=True)
class Puzzle:
    """A puzzle instance: side length n (a perfect square) plus clues.

    Cells are 0-indexed (row, col); digits run 1..n.
    """

    n: int
    clues: dict[tuple[int, int], int]

    @property
    def s(self) -> int:
        return math.isqrt(self.n)

    def region_of(self, r: int, c: int) -> int:
        s = self.s
        return (r // s) * s + (c // s)

    def open_cells(self) -> Iterable[tuple[int, int]]:
        for r in range(self.n):
            for c in range(self.n):
                if (r, c) not in self.clues:
                    yield (r, c)


def _check_puzzle(n: int, clues: dict[tuple[int, int], int]) -> None:
    s = math.isqrt(n)
    if s * s != n or s < 2:
        raise InvalidPuzzle(f"side length must be a perfect square >= 4, got {n}")
    seen: dict[tuple[str, int, int], tuple[int, int]] = {}
    for (r, c), d in clues.items():
        if not (0 <= r < n and 0 <= c < n):
            raise InvalidPuzzle(f"clue out of range at ({r}, {c})")
        if not (1 <= d <= n):
            raise InvalidPuzzle(f"digit {d} out of range at ({r}, {c})")
        region = (r // s) * s + (c // s)
        for key in (("row", r, d), ("col", c, d), ("region", region, d)):
            if key in seen:
                other = seen[key]
                raise InvalidPuzzle(
                    f"digit {d} repeated in {key[0]} {key[1]} at {(r, c)} and {other}"
                )
            seen[key] = (r, c)


def make_puzzle(n: int, clues: dict[tuple[int, int], int]) -> Puzzle:
    _check_puzzle(n, dict(clues))
    return Puzzle(n=n, clues=dict(clues))


def parse_puzzle(text: str) -> Puzzle:
    """Parse the grid file format.

    Line 1 may be "n=<N>"; then N rows of N whitespace-separated tokens,
    each a digit (decimal, 1..N) or "." for an open cell.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise PuzzleSyntaxError("empty puzzle text")
    n: int | None = None
    if lines[0].startswith("n="):
        try:
            n = int(lines[0][2:])
        except ValueError:
            raise PuzzleSyntaxError(f"bad size line {lines[0]!r}") from None
        lines = lines[1:]
    if n is None:
        n = len(lines)
    if len(lines) != n:
        raise PuzzleSyntaxError(f"expected {n} rows, got {len(lines)}")
    clues: dict[tuple[int, int], int] = {}
    for r, line in enumerate(lines):
        tokens = line.split()
        if len(tokens) != n:
            raise PuzzleSyntaxError(f"row {r}: expected {n} tokens, got {len(tokens)}")
        for c, tok in enumerate(tokens):
            if tok == ".":
                continue
            try:
                d = int(tok)
            except ValueError:
                raise PuzzleSyntaxError(f"row {r}: bad token {tok!r}") from None
            if not (1 <= d <= n):
                raise PuzzleSyntaxError(f"row {r}: digit {d} out of range 1..{n}")
            clues[(r, c)] = d
    _check_puzzle(n, clues)
    return Puzzle(n=n, clues=clues)


def format_grid(n: int, cells: dict[tuple[int, int], int]) -> str:
    """Render a (possibly partial) grid in the file format."""
    width = len(str(n))
    lines = [f"n={n}"]
    for r in range(n):
        row = []
        for c in range(n):
            d = cells.get((r, c))
            row.append(str(d).rjust(width) if d else ".".rjust(width))
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def grid_is_valid(n: int, grid: Sequence[Sequence[int]]) -> bool:
    """True when every row, column, and region is a permutation of 1..n."""
    s = math.isqrt(n)
    want = set(range(1, n + 1))
    for r in range(n):
        if set(grid[r]) != want:
            return False
    for c in range(n):
        if {grid[r][c] for r in range(n)} != want:
            return False
    for gr in range(0, n, s):
        for gc in range(0, n, s):
            block = {grid[gr + i][gc + j] for i in range(s) for j in range(s)}
            if block != want:
                return False
    return True


# --- the exactly-one-on constraint ---------------------------------------


def one_on_minimize(
    incoming: Sequence[tuple[float, float]],
    pinned_on: bool = False,
    rho: float = 1.0,
) -> list[tuple[float, float]]:
    """Pick the one-hot assignment minimizing the weighted squared cost.

    Certain inputs are hard: value >= 0.5 pins a slot on, < 0.5 pins it
    off. When the choice is forced (a slot pinned on, all but one pinned
    off, or the constraint already satisfied externally via pinned_on)
    the outputs are certain as well; otherwise the cheapest free slot
    wins and the outputs carry standard weight. Turning slot i on changes
    the cost by w_i*(1 - 2*n_i)/2, so the minimizer is the smallest such
    score; ties prefer the slot closest to 1 and then the lowest index.
    """
    n_pinned_on = 0
    pinned_slot = -1
    n_cand = 0
    last_cand = -1
    best_slot = -1
    best_score = math.inf
    best_tie = math.inf
    for i, (n, w) in enumerate(incoming):
        if Weight.is_infinite(w):
            if n >= 0.5:
                n_pinned_on += 1
                pinned_slot = i
        else:
            n_cand += 1
            last_cand = i
            score = 0.5 * w * (1.0 - 2.0 * n)
            tie = abs(1.0 - n)
            if score < best_score or (score == best_score and tie < best_tie):
                best_score = score
                best_tie = tie
                best_slot = i
    if pinned_on:
        if n_pinned_on > 0:
            raise InfeasibleCertainty("slot pinned on in an already satisfied constraint")
        return [(0.0, Weight.INF) for _ in incoming]
    if n_pinned_on >= 2:
        raise InfeasibleCertainty("two slots pinned on in an exactly-one constraint")
    if n_pinned_on == 1:
        winner, certain = pinned_slot, True
    elif n_cand == 0:
        raise InfeasibleCertainty("every slot pinned off in an exactly-one constraint")
    elif n_cand == 1:
        winner, certain = last_cand, True
    else:
        winner, certain = best_slot, False
    w_out = Weight.INF if certain else rho
    return [((1.0 if i == winner else 0.0), w_out) for i in range(len(incoming))]


def _one_on_registered(params, incoming, rho):
    return one_on_minimize(incoming, pinned_on=bool(params.get("pinned_on")), rho=rho)


register_minimizer("one_on", _one_on_registered)


# --- graph construction ---------------------------------------------------


@dataclass
class IndicatorIndex:
    """Bijection between open-cell digit possibilities and variable ids."""

    n: int
    var_of: dict[tuple[int, int, int], int] = field(default_factory=dict)
    cell_of: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    # factor id -> ("cell", r, c) | ("row", r, d) | ("col", c, d) | ("region", g, d)
    family_of: dict[int, tuple] = field(default_factory=dict)

    def add(self, r: int, c: int, d: int, vid: int) -> None:
        self.var_of[(r, c, d)] = vid
        self.cell_of[vid] = (r, c, d)


def build_graph(puzzle: Puzzle, rng_seed: int = 0) -> tuple[FactorGraph, IndicatorIndex]:
    """Create indicators for open possibilities and the four factor families.

    A possibility survives the build only if no clue directly contradicts
    it (same cell decided, or the same digit clued in the cell's row,
    column, or region). Factors are created per family member that still
    has open possibilities, so a fully clued puzzle builds an empty graph.
    """
    n = puzzle.n
    graph = FactorGraph()
    index = IndicatorIndex(n=n)
    rng = np.random.default_rng(rng_seed)

    row_used: dict[tuple[int, int], bool] = {}
    col_used: dict[tuple[int, int], bool] = {}
    region_used: dict[tuple[int, int], bool] = {}
    for (r, c), d in puzzle.clues.items():
        row_used[(r, d)] = True
        col_used[(c, d)] = True
        region_used[(puzzle.region_of(r, c), d)] = True

    for r in range(n):
        for c in range(n):
            if (r, c) in puzzle.clues:
                continue
            g = puzzle.region_of(r, c)
            possible = [
                d
                for d in range(1, n + 1)
                if (r, d) not in row_used and (c, d) not in col_used and (g, d) not in region_used
            ]
            if not possible:
                raise Inconsistent(f"cell ({r}, {c}) has no possible digit")
            for d in possible:
                vid = graph.add_variable(initial_value=float(rng.random()))
                index.add(r, c, d, vid)

    def add_family(tag: tuple, members: list[int]) -> None:
        if members:
            fid = graph.add_factor("one_on", {}, members)
            index.family_of[fid] = tag

    for r in range(n):
        for c in range(n):
            members = [index.var_of[(r, c, d)] for d in range(1, n + 1)
                       if (r, c, d) in index.var_of]
            add_family(("cell", r, c), members)
    for r in range(n):
        for d in range(1, n + 1):
            members = [index.var_of[(r, c, d)] for c in range(n) if (r, c, d) in index.var_of]
            add_family(("row", r, d), members)
    for c in range(n):
        for d in range(1, n + 1):
            members = [index.var_of[(r, c, d)] for r in range(n) if (r, c, d) in index.var_of]
            add_family(("col", c, d), members)
    for g in range(n):
        s = puzzle.s
        gr, gc = (g // s) * s, (g % s) * s
        for d in range(1, n + 1):
            members = [
                index.var_of[(gr + i, gc + j, d)]
                for i in range(s)
                for j in range(s)
                if (gr + i, gc + j, d) in index.var_of
            ]
            add_family(("region", g, d), members)

    graph.initialized = True
    return graph, index


# --- reasoners ------------------------------------------------------------


@dataclass(frozen=True)
class PossibilityRemoved:
    row: int
    col: int
    digit: int


class PossibilityReasoner(LocalReasoner):
    """Watches indicators and reports digits that become certainly off.

    Keeps the per-cell possibility sets and emits each (row, col, digit)
    removal exactly once, the iteration its indicator concurs certainly
    at 0. Emits nothing otherwise.
    """

    def __init__(self, puzzle: Puzzle, index: IndicatorIndex):
        super().__init__()
        self.index = index
        self.possibilities: dict[tuple[int, int], set[int]] = {}
        for (r, c, d) in index.var_of:
            self.possibilities.setdefault((r, c), set()).add(d)
        self.decided: dict[tuple[int, int], int] = dict(puzzle.clues)
        self._reported: set[tuple[int, int, int]] = set()

    def watched_variables(self) -> Sequence[int]:
        return tuple(self.index.cell_of)

    def reason(self, view: LocalView) -> None:
        for vid in view.newly_certain:
            rcd = self.index.cell_of.get(vid)
            if rcd is None:
                continue
            r, c, d = rcd
            if view.value(vid) < 0.5:
                if rcd not in self._reported:
                    self._reported.add(rcd)
                    self.possibilities[(r, c)].discard(d)
                    self.emit(PossibilityRemoved(r, c, d))
            else:
                self.decided[(r, c)] = d
                self.possibilities[(r, c)] = {d}


class PruningReasoner(GlobalReasoner):
    """Removes logically dead structure so iterations get cheaper.

    Each removal report costs the indicator its (up to) four constraint
    edges; the variable is then pruned automatically. A factor whose live
    edges all disappeared is dropped, and a factor down to a single live
    edge is dropped once its variable has been pinned on by the
    constraint's own certainty rule.
    """

    name = "pruning"

    def __init__(self, index: IndicatorIndex):
        self.index = index
        # factors whose live-edge count changed at the last boundary
        self._recheck: set[int] = set()
        # single-edge factors waiting on their variable's certainty
        self._await_certain: dict[int, set[int]] = {}
        self._seen: set[tuple[int, int, int]] = set()

    def reason(self, ctx: GlobalContext) -> None:
        graph = ctx.graph
        recheck = self._recheck
        self._recheck = set()
        for vid in ctx.newly_certain:
            waiting = self._await_certain.pop(vid, None)
            if waiting:
                recheck.update(waiting)
            rcd = self.index.cell_of.get(vid)
            if rcd is not None and vid in graph.variables and ctx.value(vid) >= 0.5:
                for eid in graph.variables[vid].edges:
                    recheck.add(graph.edges[eid].factor)

        remove_factors: list[int] = []
        for fid in sorted(recheck):
            fac = graph.factors.get(fid)
            if fac is None:
                continue
            live = fac.edges
            if len(live) == 0:
                remove_factors.append(fid)
            elif len(live) == 1:
                vid = graph.edges[live[0]].variable
                if ctx.certain(vid):
                    remove_factors.append(fid)
                else:
                    self._await_certain.setdefault(vid, set()).add(fid)
            # two or more live edges: nothing can change until another
            # removal or certainty lands, both of which re-register it

        doomed = set(remove_factors)
        edge_removals: list[int] = []
        for event in ctx.events:
            if not isinstance(event, PossibilityRemoved):
                continue
            key = (event.row, event.col, event.digit)
            if key in self._seen:
                continue
            self._seen.add(key)
            vid = self.index.var_of.get(key)
            if vid is None or vid not in graph.variables:
                continue
            for eid in sorted(graph.variables[vid].edges):
                fid = graph.edges[eid].factor
                self._recheck.add(fid)
                if fid not in doomed:
                    edge_removals.append(eid)

        for fid in remove_factors:
            ctx.queue_edit(RemoveFactor(fid))
        for eid in edge_removals:
            ctx.queue_edit(RemoveEdge(eid))


class SolutionDetection(GlobalReasoner):
    """Halts the run once a rule-valid grid can be read off.

    A cell counts as resolved when a clue or certain indicator decides
    it, or when exactly one of its live indicators sits above 0.5. The
    grid assembled from resolved cells must pass the full rule check.
    The halt itself waits for a quiet iteration (no fresh certainties,
    no events, no edits queued) so that pruning finishes tearing down
    structure the solution has made irrelevant.
    """

    name = "solution_detection"

    def __init__(self, puzzle: Puzzle, index: IndicatorIndex):
        self.puzzle = puzzle
        self.index = index
        self.decided: dict[tuple[int, int], int] = dict(puzzle.clues)
        self.solution: list[list[int]] | None = None
        #: iteration the grid first read off complete and valid
        self.solved_at: int | None = None
        cells = sorted({(r, c) for (r, c, _) in index.var_of})
        self._cell_pos = {cell: i for i, cell in enumerate(cells)}
        self._cells = cells
        vids = sorted(index.cell_of)
        self._vids = np.asarray(vids, dtype=np.int64)
        self._vid_cell = np.asarray(
            [self._cell_pos[index.cell_of[v][:2]] for v in vids], dtype=np.int64
        )
        self._vid_digit = np.asarray([index.cell_of[v][2] for v in vids], dtype=np.int64)

    def reason(self, ctx: GlobalContext) -> None:
        for vid in ctx.newly_certain:
            rcd = self.index.cell_of.get(vid)
            if rcd is not None and ctx.value(vid) >= 0.5:
                self.decided[rcd[:2]] = rcd[2]
        n = self.puzzle.n
        if len(self.decided) < n * n:
            z = ctx.gather(self._vids)
            on = z > 0.5  # NaN (pruned) compares false
            ncells = len(self._cells)
            counts = np.bincount(self._vid_cell[on], minlength=ncells)
            digit_sum = np.bincount(
                self._vid_cell[on], weights=self._vid_digit[on].astype(np.float64),
                minlength=ncells,
            )
            grid_cells = dict(self.decided)
            for cell, i in self._cell_pos.items():
                if cell in grid_cells:
                    continue
                if counts[i] == 1:
                    grid_cells[cell] = int(digit_sum[i])
                else:
                    return  # unresolved cell, keep iterating
        else:
            grid_cells = self.decided
        grid = [[grid_cells[(r, c)] for c in range(n)] for r in range(n)]
        if not grid_is_valid(n, grid):
            return
        self.solution = grid
        if self.solved_at is None:
            self.solved_at = ctx.iteration
        quiet = (
            not ctx.newly_certain and not ctx.events and ctx.pending_edit_count == 0
        )
        if quiet:
            ctx.halt()


# --- the solver -----------------------------------------------------------


@dataclass
class Solution:
    grid: list[list[int]]
    stats: dict


def solve(
    puzzle: Puzzle,
    config: EngineConfig | None = None,
    dynamics: bool = True,
    on_status: Callable[[IterationStatus], None] | None = None,
) -> Solution:
    """Solve a puzzle with the message-passing engine.

    dynamics=False runs without the pruning reasoner, leaving the graph
    size fixed; the possibility and detection reasoners stay on in both
    modes. on_status sees every iteration, for streaming callers. Raises
    Unsolved when the iteration budget runs out and Inconsistent when
    certainty propagation derives a contradiction.
    """
    if config is None:
        config = EngineConfig(max_iterations=20_000)
    t_start = time.perf_counter()
    graph, index = build_graph(puzzle, rng_seed=config.rng_seed)

    if not index.var_of:  # fully determined by clues at build time
        grid = [[puzzle.clues[(r, c)] for c in range(puzzle.n)] for r in range(puzzle.n)]
        if not grid_is_valid(puzzle.n, grid):
            raise Inconsistent("clues fill the grid but break the rules")
        solve_ms = (time.perf_counter() - t_start) * 1e3
        return Solution(
            grid=grid,
            stats={
                "iterations": 0,
                "propagation_iterations": 0,
                "numeric_iterations": 0,
                "final_variables": 0,
                "final_factors": 0,
                "final_edges": 0,
                "ms_per_iter": 0.0,
                "solve_ms": solve_ms,
                "iteration_ms": [],
            },
        )

    possibility = PossibilityReasoner(puzzle, index)
    detection = SolutionDetection(puzzle, index)
    globals_: list[GlobalReasoner] = []
    if dynamics:
        globals_.append(PruningReasoner(index))
    globals_.append(detection)

    iterations = 0
    certainty_iterations = 0
    still_iterations: list[int] = []  # iterations with no fresh certainty
    iteration_ms: list[float] = []
    last = None
    try:
        for status in run(graph, config, [possibility], globals_):
            iterations = status.iteration
            if status.new_certain:
                certainty_iterations += 1
            else:
                still_iterations.append(status.iteration)
            iteration_ms.append(sum(status.phase_us.values()) / 1000.0)
            last = status
            if on_status is not None:
                on_status(status)
    except (CertaintyConflict, InfeasibleCertainty) as exc:
        raise Inconsistent(f"contradiction at iteration {getattr(exc, 'iteration', '?')}: {exc}") from exc

    solve_ms = (time.perf_counter() - t_start) * 1e3
    if detection.solution is None:
        raise Unsolved(f"no solution found in {iterations} iterations", iterations=iterations)
    grid = detection.solution
    for (r, c), d in puzzle.clues.items():
        if grid[r][c] != d:
            raise Inconsistent(f"solution contradicts clue at ({r}, {c})")
    solved_at = detection.solved_at if detection.solved_at is not None else iterations
    numeric = sum(1 for i in still_iterations if i <= solved_at)
    stats = {
        "iterations": iterations,
        "propagation_iterations": certainty_iterations,
        # searching iterations: no certainty progress, solution not yet readable
        "numeric_iterations": numeric,
        "final_variables": last.live_variables if last else 0,
        "final_factors": last.live_factors if last else 0,
        "final_edges": last.live_edges if last else 0,
        "ms_per_iter": solve_ms / iterations if iterations else 0.0,
        "solve_ms": solve_ms,
        # engine-phase wall time per iteration, for trend comparisons
        "iteration_ms": iteration_ms,
    }
    return Solution(grid=grid, stats=stats)


# --- logic-only classifier and exhaustive oracle --------------------------


def _families(n: int) -> list[list[tuple[int, int]]]:
    s = math.isqrt(n)
    fams = []
    for r in range(n):
        fams.append([(r, c) for c in range(n)])
    for c in range(n):
        fams.append([(r, c) for r in range(n)])
    for gr in range(0, n, s):
        for gc in range(0, n, s):
            fams.append([(gr + i, gc + j) for i in range(s) for j in range(s)])
    return fams


def solve_singles(puzzle: Puzzle) -> list[list[int]] | None:
    """Closure of naked and hidden singles; None if that is not enough.

    This is the logic-only classifier: a puzzle this function completes
    is solvable by certainty propagation alone.
    """
    n = puzzle.n
    full = (1 << n) - 1
    cand = [[full] * n for _ in range(n)]
    fams = _families(n)

    def place(r: int, c: int, d: int) -> bool:
        bit = 1 << (d - 1)
        if not (cand[r][c] & bit):
            return False
        cand[r][c] = bit
        s = puzzle.s
        for (rr, cc) in fams[r]:
            if (rr, cc) != (r, c):
                cand[rr][cc] &= ~bit
        for (rr, cc) in fams[n + c]:
            if (rr, cc) != (r, c):
                cand[rr][cc] &= ~bit
        g = (r // s) * s + (c // s)
        for (rr, cc) in fams[2 * n + g]:
            if (rr, cc) != (r, c):
                cand[rr][cc] &= ~bit
        return True

    placed: dict[tuple[int, int], int] = {}
    for (r, c), d in puzzle.clues.items():
        if not place(r, c, d):
            return None
        placed[(r, c)] = d

    changed = True
    while changed:
        changed = False
        for r in range(n):
            for c in range(n):
                if (r, c) in placed:
                    continue
                m = cand[r][c]
                if m == 0:
                    return None
                if m & (m - 1) == 0:  # naked single
                    d = m.bit_length()
                    if not place(r, c, d):
                        return None
                    placed[(r, c)] = d
                    changed = True
        for fam in fams:
            for d in range(1, n + 1):
                bit = 1 << (d - 1)
                spots = [(r, c) for (r, c) in fam if (r, c) not in placed and cand[r][c] & bit]
                if not spots and not any(placed.get(cell) == d for cell in fam):
                    return None
                if len(spots) == 1 and not any(placed.get(cell) == d for cell in fam):
                    r, c = spots[0]
                    if not place(r, c, d):
                        return None
                    placed[(r, c)] = d
                    changed = True
    if len(placed) == n * n:
        grid = [[placed[(r, c)] for c in range(n)] for r in range(n)]
        return grid if grid_is_valid(n, grid) else None
    return None


def count_solutions(puzzle: Puzzle, limit: int = 2) -> tuple[int, list[list[int]] | None]:
    """Count satisfying grids up to `limit` via propagation-assisted search.

    Returns (count, one solution or None). Propagation applies naked and
    hidden singles (sound deductions, so the count stays exact); branching
    picks a smallest candidate set.
    """
    n = puzzle.n
    s = puzzle.s
    full = (1 << n) - 1
    fams = _families(n)
    fam_of_cell: dict[tuple[int, int], list[int]] = {}
    for fi, fam in enumerate(fams):
        for cell in fam:
            fam_of_cell.setdefault(cell, []).append(fi)

    cand0 = [full] * (n * n)

    def idx(r: int, c: int) -> int:
        return r * n + c

    def assign(cand: list[int], r: int, c: int, d: int) -> bool:
        bit = 1 << (d - 1)
        if not cand[idx(r, c)] & bit:
            return False
        cand[idx(r, c)] = bit
        for fi in fam_of_cell[(r, c)]:
            for (rr, cc) in fams[fi]:
                if (rr, cc) == (r, c):
                    continue
                j = idx(rr, cc)
                if cand[j] & bit:
                    cand[j] &= ~bit
                    if cand[j] == 0:
                        return False
        return True

    for (r, c), d in puzzle.clues.items():
        if not assign(cand0, r, c, d):
            return 0, None

    def propagate(cand: list[int]) -> bool:
        changed = True
        while changed:
            changed = False
            for j in range(n * n):
                m = cand[j]
                if m == 0:
                    return False
                # naked single that still has unresolved peers
                if m & (m - 1) == 0:
                    r, c = divmod(j, n)
                    bit = m
                    for fi in fam_of_cell[(r, c)]:
                        for (rr, cc) in fams[fi]:
                            if (rr, cc) == (r, c):
                                continue
                            k = idx(rr, cc)
                            if cand[k] & bit:
                                cand[k] &= ~bit
                                if cand[k] == 0:
                                    return False
                                changed = True
            for fam in fams:
                unresolved_mask = 0
                for (rr, cc) in fam:
                    m = cand[idx(rr, cc)]
                    if m & (m - 1):
                        unresolved_mask |= m
                for d in range(1, n + 1):
                    bit = 1 << (d - 1)
                    spots = []
                    satisfied = False
                    for (rr, cc) in fam:
                        m = cand[idx(rr, cc)]
                        if m == bit:
                            satisfied = True
                            break
                        if m & bit:
                            spots.append((rr, cc))
                    if satisfied:
                        continue
                    if not spots:
                        return False
                    if len(spots) == 1:
                        r, c = spots[0]
                        if not assign(cand, r, c, bit.bit_length()):
                            return False
                        changed = True
        return True

    count = 0
    witness: list[list[int]] | None = None

    def dfs(cand: list[int]) -> None:
        nonlocal count, witness
        if count >= limit:
            return
        if not propagate(cand):
            return
        best_j = -1
        best_sz = n + 1
        for j in range(n * n):
            m = cand[j]
            sz = m.bit_count()
            if 1 < sz < best_sz:
                best_sz = sz
                best_j = j
                if sz == 2:
                    break
        if best_j < 0:
            count += 1
            if witness is None:
                witness = [
                    [cand[idx(r, c)].bit_length() for c in range(n)] for r in range(n)
                ]
            return
        r, c = divmod(best_j, n)
        m = cand[best_j]
        d = 1
        while m and count < limit:
            if m & 1:
                child = cand.copy()
                if assign(child, r, c, d):
                    dfs(child)
            m >>= 1
            d += 1

    dfs(cand0.copy())
    return count, witness


def solve_bruteforce(puzzle: Puzzle) -> list[list[int]]:
    """Exhaustive-search oracle: the unique solution, or an error.

    Raises NoSolution / MultipleSolutions when the puzzle does not have
    exactly one satisfying grid.
    """
    count, witness = count_solutions(puzzle, limit=2)
    if count == 0:
        raise NoSolution("puzzle has no satisfying assignment")
    if count > 1:
        raise MultipleSolutions("puzzle is underdetermined")
    assert witness is not None
    return witness
