"""Generate the bundled puzzle corpus.

Builds random complete grids by symmetry-transforming a canonical
pattern, then carves clues away:

  * easy 9x9: every removal must keep the puzzle solvable by the naked
    and hidden singles closure (which also guarantees uniqueness),
  * hard 9x9: removals keep the solution unique (exhaustive count) and
    the final puzzle must defeat the singles closure,
  * 16x16 / 25x25: binary-search the deepest removal prefix the singles
    closure still solves, push a few removals past the break point
    (uniqueness-checked), then greedily add solution digits back wherever
    that shrinks the stalled region without reviving the closure. The
    add-back stops at a knot: a puzzle propagation resolves almost
    everywhere, stalling on one compact region the numeric phase has to
    search. That shape keeps the pruned graph small relative to the
    static one, which is the regime the solver's graph dynamics are
    built for. Knot size varies a lot with the carve order, so several
    orders are tried per grid and each candidate is vetted directly.

Every hard candidate is vetted against the message-passing solver under
an iteration budget so everything shipped is known solvable, both with
and without graph dynamics, and the large puzzles also have to hit the
measured small-final-graph regime before they ship.

Deterministic for a fixed master seed. Writes src/triweight/corpus/.
"""

from __future__ import annotations

import math
import pathlib
import random
import sys
import time

import numpy as np

from triweight.sudoku import (
    Puzzle,
    _families,
    count_solutions,
    format_grid,
    grid_is_valid,
    make_puzzle,
    solve,
    solve_singles,
)
from triweight.twa_engine import EngineConfig

OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "triweight" / "corpus"
MASTER_SEED = 20240817


def seeded(*parts: object) -> random.Random:
    # tuple seeds go through hash() and change per process; string seeds
    # are hashed with sha512 and reproduce everywhere
    return random.Random(":".join(map(str, parts)))


def base_grid(n: int) -> list[list[int]]:
    s = math.isqrt(n)
    return [[(s * (r % s) + r // s + c) % n + 1 for c in range(n)] for r in range(n)]


def shuffled_grid(n: int, rng: random.Random) -> list[list[int]]:
    s = math.isqrt(n)
    g = base_grid(n)
    digits = list(range(1, n + 1))
    rng.shuffle(digits)
    g = [[digits[d - 1] for d in row] for row in g]

    bands = list(range(s))
    rng.shuffle(bands)
    rows = []
    for b in bands:
        inner = list(range(s))
        rng.shuffle(inner)
        rows.extend(b * s + i for i in inner)
    g = [g[r] for r in rows]

    stacks = list(range(s))
    rng.shuffle(stacks)
    cols = []
    for b in stacks:
        inner = list(range(s))
        rng.shuffle(inner)
        cols.extend(b * s + i for i in inner)
    g = [[row[c] for c in cols] for row in g]

    if rng.random() < 0.5:
        g = [list(col) for col in zip(*g)]
    assert grid_is_valid(n, g)
    return g


def carve_easy(grid: list[list[int]], rng: random.Random, target_clues: int) -> Puzzle:
    n = len(grid)
    clues = {(r, c): grid[r][c] for r in range(n) for c in range(n)}
    order = list(clues)
    rng.shuffle(order)
    for cell in order:
        if len(clues) <= target_clues:
            break
        d = clues.pop(cell)
        if solve_singles(Puzzle(n=n, clues=dict(clues))) is None:
            clues[cell] = d
    return make_puzzle(n, clues)


def carve_hard(grid: list[list[int]], rng: random.Random) -> Puzzle | None:
    n = len(grid)
    clues = {(r, c): grid[r][c] for r in range(n) for c in range(n)}
    order = list(clues)
    rng.shuffle(order)
    for cell in order:
        d = clues.pop(cell)
        cnt, _ = count_solutions(Puzzle(n=n, clues=dict(clues)), limit=2)
        if cnt != 1:
            clues[cell] = d
    p = make_puzzle(n, clues)
    if solve_singles(p) is not None:
        return None  # still a pure-logic puzzle, not hard enough
    return p


def vet_with_solver(p: Puzzle, budget_iters: int, budget_s: float) -> bool:
    t0 = time.perf_counter()
    try:
        solve(p, EngineConfig(max_iterations=budget_iters, rng_seed=1))
    except Exception:
        return False
    return (time.perf_counter() - t0) <= budget_s


_FAM_ARRAYS: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _fam_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    got = _FAM_ARRAYS.get(n)
    if got is None:
        fams = _families(n)
        rows = np.array([[rc[0] for rc in fam] for fam in fams], dtype=np.int64)
        cols = np.array([[rc[1] for rc in fam] for fam in fams], dtype=np.int64)
        got = (rows, cols)
        _FAM_ARRAYS[n] = got
    return got


def closure_stall(puzzle: Puzzle) -> set[tuple[int, int]] | None:
    """Open cells the singles closure cannot decide; None on contradiction.

    An empty set means the closure solves the puzzle outright. Batch
    numpy sweeps; singles propagation is confluent, so the fixpoint
    matches the reference solver cell for cell. Assumes clue sets are
    subsets of a complete grid (the only kind the carver produces), so
    clue-on-clue conflicts need no detection of their own.
    """
    n, s = puzzle.n, puzzle.s
    full = (1 << n) - 1
    digits = np.arange(n, dtype=np.int64)
    fam_r, fam_c = _fam_arrays(n)
    blk = (np.arange(n)[:, None] // s) * s + np.arange(n)[None, :] // s

    placed = np.zeros((n, n), dtype=np.int64)  # the placed digit's bit, else 0
    for (r, c), d in puzzle.clues.items():
        placed[r, c] = 1 << (d - 1)
    cand = np.full((n, n), full, dtype=np.int64)

    while True:
        # eliminate: every open cell drops the digits its families placed
        row_used = np.bitwise_or.reduce(placed, axis=1)
        col_used = np.bitwise_or.reduce(placed, axis=0)
        blk_used = np.zeros(n, dtype=np.int64)
        np.bitwise_or.at(blk_used, blk.ravel(), placed.ravel())
        used = row_used[:, None] | col_used[None, :] | blk_used[blk]
        open_mask = placed == 0
        cand = np.where(open_mask, cand & ~used, placed)
        if bool(np.any(open_mask & (cand == 0))):
            return None
        naked = open_mask & ((cand & (cand - 1)) == 0) & (cand != 0)
        if bool(np.any(naked)):
            placed = np.where(naked, cand, placed)
            continue
        cand_f = cand[fam_r, fam_c]  # (3n, n) candidate masks per family
        spots = (cand_f[:, :, None] >> digits[None, None, :]) & 1
        counts = spots.sum(axis=1)  # (family, digit) -> spot count
        if bool(np.any(counts == 0)):
            return None
        singles = counts == 1
        if not bool(np.any(singles)):
            break
        pos = spots.argmax(axis=1)
        fi, di = np.nonzero(singles)
        ci = pos[fi, di]
        rr = fam_r[fi, ci]
        cc = fam_c[fi, ci]
        bit = np.int64(1) << di
        # a placed cell can be its family's lone spot for its own digit;
        # that write would be a no-op, so only genuinely new ones count
        newly = placed[rr, cc] == 0
        if not bool(np.any(newly)):
            break
        placed[rr, cc] = np.where(newly, bit, placed[rr, cc])
    rs, cs = np.nonzero(placed == 0)
    return {(int(r), int(c)) for r, c in zip(rs, cs)}


def closure_solves(puzzle: Puzzle) -> bool:
    return closure_stall(puzzle) == set()


def carve_knot(
    grid: list[list[int]],
    order_rng: random.Random,
    depth: int,
    budget_s: float = 300.0,
    add_sample: int = 100,
) -> Puzzle | None:
    """Carve one search knot: defeat the closure, then heal around it.

    Carves to the singles threshold along a random order, keeps removing
    (uniqueness-checked) until the closure breaks plus `depth` removals
    beyond, then greedily adds solution digits back wherever that shrinks
    the stalled region without restoring the closure. The result reads as
    a mostly-deducible puzzle with one compact region only numeric search
    can finish. Gives up (None) past budget_s.
    """
    deadline = time.perf_counter() + budget_s
    n = len(grid)
    cells = [(r, c) for r in range(n) for c in range(n)]
    order = list(cells)
    order_rng.shuffle(order)

    def clues_after(k: int) -> dict[tuple[int, int], int]:
        clues = {cell: grid[cell[0]][cell[1]] for cell in cells}
        for cell in order[:k]:
            del clues[cell]
        return clues

    # deepest removal prefix the closure still solves (monotone in k)
    lo, hi = 0, len(order)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if closure_solves(Puzzle(n=n, clues=clues_after(mid))):
            lo = mid
        else:
            hi = mid - 1
    clues = clues_after(lo)

    # the threshold prefix usually ends on a uniqueness break, not a real
    # stall, so the crawl to genuine closure defeat can run long; only the
    # wall clock bounds it
    past_defeat = 0
    for cell in order[lo:]:
        if time.perf_counter() > deadline:
            return None
        if not closure_solves(Puzzle(n=n, clues=dict(clues))):
            past_defeat += 1
            if past_defeat > depth:
                break
        d = clues.pop(cell)
        if count_solutions(Puzzle(n=n, clues=dict(clues)), limit=2)[0] != 1:
            clues[cell] = d
    if closure_solves(Puzzle(n=n, clues=dict(clues))):
        return None

    # adding a clue can only help the closure, so uniqueness is preserved
    # and the stall shrinks monotonically toward the knot
    while True:
        if time.perf_counter() > deadline:
            return None
        stall = closure_stall(Puzzle(n=n, clues=dict(clues)))
        if not stall:
            return None
        pool = sorted(stall)
        if len(pool) > add_sample:
            pool = order_rng.sample(pool, add_sample)
        best = None
        for cell in pool:
            clues[cell] = grid[cell[0]][cell[1]]
            shrunk = closure_stall(Puzzle(n=n, clues=dict(clues)))
            del clues[cell]
            if shrunk and (best is None or len(shrunk) < best[0]):
                best = (len(shrunk), cell)
        if best is None or best[0] >= len(stall):
            break
        clues[best[1]] = grid[best[1][0]][best[1][1]]

    p = make_puzzle(n, clues)
    if solve_singles(p) is not None:
        return None
    return p


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    master = random.Random(MASTER_SEED)

    made = 0
    seed = 0
    while made < 20:
        rng = seeded(MASTER_SEED, "easy9", seed)
        seed += 1
        p = carve_easy(shuffled_grid(9, rng), rng, target_clues=rng.randint(28, 36))
        name = f"s9_easy_{made + 1:02d}.txt"
        (OUT / name).write_text(format_grid(9, p.clues))
        made += 1
        print(name, "clues", len(p.clues), flush=True)

    made = 0
    seed = 0
    while made < 20:
        rng = seeded(MASTER_SEED, "hard9", seed)
        seed += 1
        p = carve_hard(shuffled_grid(9, rng), rng)
        if p is None:
            continue
        if not vet_with_solver(p, budget_iters=6000, budget_s=4.0):
            print("  rejected (solver budget), seed", seed - 1, flush=True)
            continue
        name = f"s9_hard_{made + 1:02d}.txt"
        (OUT / name).write_text(format_grid(9, p.clues))
        made += 1
        print(name, "clues", len(p.clues), flush=True)

    for n, count, tag in ((16, 10, "knot16"), (25, 10, "knot25")):
        made = 0
        seed = 0
        while made < count:
            seed += 1
            grid = shuffled_grid(n, seeded(MASTER_SEED, tag, seed - 1))
            shipped = False
            for trial in range(6):
                rng = seeded(MASTER_SEED, tag, seed - 1, trial)
                p = carve_knot(
                    grid, rng, depth=1 + (trial % 2), budget_s=180.0 if n == 16 else 560.0
                )
                if p is None:
                    print(f"  s{n} seed {seed - 1} trial {trial}: no knot", flush=True)
                    continue
                try:
                    on = solve(p, EngineConfig(max_iterations=20_000, rng_seed=0), dynamics=True)
                    off = solve(p, EngineConfig(max_iterations=20_000, rng_seed=0), dynamics=False)
                except Exception as exc:
                    print(
                        f"  s{n} seed {seed - 1} trial {trial}: solver rejected "
                        f"({type(exc).__name__})",
                        flush=True,
                    )
                    continue
                if on.grid != grid or off.grid != grid:
                    print(f"  s{n} seed {seed - 1} trial {trial}: wrong grid", flush=True)
                    continue
                final = lambda s: s["final_variables"] + s["final_factors"] + s["final_edges"]
                ratio = final(on.stats) / max(final(off.stats), 1)
                numeric = on.stats["numeric_iterations"]
                # the shipped corpus must sit in the dynamics-friendly regime:
                # a real numeric phase, most structure retired by the end
                if numeric < 25 or ratio > 0.20:
                    print(
                        f"  s{n} seed {seed - 1} trial {trial}: regime miss "
                        f"(numeric={numeric}, ratio={ratio:.2f})",
                        flush=True,
                    )
                    continue
                name = f"s{n}_{made + 1:02d}.txt"
                (OUT / name).write_text(format_grid(n, p.clues))
                made += 1
                shipped = True
                print(
                    f"{name} clues {len(p.clues)} numeric {numeric} ratio {ratio:.2f}",
                    flush=True,
                )
                break
            if not shipped:
                print(f"  s{n} seed {seed - 1}: all trials missed, next grid", flush=True)

    print("done")


if __name__ == "__main__":
    sys.exit(main())
