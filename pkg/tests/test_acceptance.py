"""Release gate: every shipped claim checked at its stated tolerance.

Each test prints one [PASS]/[FAIL] verdict line (also echoed in the
terminal summary by conftest). A failing line means the claim does not
hold on this machine; the assert carries the same text.
"""

import math
import threading
import time
from pathlib import Path

import numpy as np

import test_engine_run
import test_rtree
from conftest import record_criterion
from test_packing import pair_oracle
from test_rtree import brute_pairs, random_box
from test_service import (
    SNAP,
    Client,
    Snapshot,
    circle_pos,
    open_spot,
    own_depth,
    running_service,
)
from test_sudoku import one_on_oracle

from triweight.errors import InfeasibleCertainty
from triweight.packing import pack, pair_minimize, radius_for_density
from triweight.rtree import RTree
from triweight.steer_service import DragEnd, DragMove, DragStart, Pause, Resume, Vacancy, serve_packing
from triweight.sudoku import (
    one_on_minimize,
    parse_puzzle,
    solve,
    solve_bruteforce,
    solve_singles,
)
from triweight.twa_engine import EngineConfig

CORPUS = Path(__file__).resolve().parent.parent / "src" / "triweight" / "corpus"


def corpus_puzzles(prefix: str):
    for path in sorted(CORPUS.glob(f"{prefix}*.txt")):
        yield path.name, parse_puzzle(path.read_text())


def graph_size(stats: dict) -> int:
    return stats["final_variables"] + stats["final_factors"] + stats["final_edges"]


def tail_quartile_mean(iteration_ms: list[float]) -> float:
    q = max(1, len(iteration_ms) // 4)
    tail = iteration_ms[-q:]
    return sum(tail) / len(tail)


# --- criterion 1: the 9x9 corpus against the backtracking oracle ----------


def test_a1_nine_by_nine_corpus():
    names = []
    worst_seconds = 0.0
    mismatches = []
    overtime = []
    for prefix in ("s9_easy_", "s9_hard_"):
        for name, puzzle in corpus_puzzles(prefix):
            names.append(name)
            t0 = time.perf_counter()
            sol = solve(puzzle)
            dt = time.perf_counter() - t0
            worst_seconds = max(worst_seconds, dt)
            if dt > 5.0:
                overtime.append((name, dt))
            if sol.grid != solve_bruteforce(puzzle):
                mismatches.append(name)
    ok = len(names) == 40 and not mismatches and not overtime
    line = (
        f"A1 sudoku 9x9 corpus: {len(names) - len(mismatches)}/{len(names)} match the "
        f"backtracking oracle, worst solve {worst_seconds:.2f}s (budget 5s)"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 2: propagation-only puzzles finish by certainty alone ------


def test_a2_singles_class_collapse():
    singles = []
    for prefix in ("s9_easy_", "s9_hard_", "s16_", "s25_"):
        for name, puzzle in corpus_puzzles(prefix):
            if solve_singles(puzzle) is not None:
                singles.append((name, puzzle))
    failures = []
    for name, puzzle in singles:
        stats = solve(puzzle, dynamics=True).stats
        # with pruning on, structure leaves the graph only once its winner
        # is pinned at infinite weight, so an empty final graph plus zero
        # numeric-search iterations witnesses an all-certain assignment
        if stats["numeric_iterations"] != 0 or graph_size(stats) != 0:
            failures.append(name)
    ok = len(singles) == 20 and not failures
    line = (
        f"A2 certainty propagation: {len(singles) - len(failures)}/{len(singles)} "
        f"singles-class puzzles end with zero numeric iterations and final graph size 0"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 3: graph dynamics shrink work on the big corpora -----------


def test_a3_dynamics_trend_sixteen_and_twentyfive():
    checked = 0
    bad_ratio = []
    bad_ms = []
    bad_grid = []
    for prefix in ("s16_", "s25_"):
        for name, puzzle in corpus_puzzles(prefix):
            on = solve(puzzle, dynamics=True)
            off = solve(puzzle, dynamics=False)
            checked += 1
            if on.grid != off.grid:
                bad_grid.append(name)
            size_on, size_off = graph_size(on.stats), graph_size(off.stats)
            if not size_on <= 0.25 * size_off:
                bad_ratio.append((name, size_on, size_off))
            ms_on = tail_quartile_mean(on.stats["iteration_ms"])
            ms_off = tail_quartile_mean(off.stats["iteration_ms"])
            if not ms_on < ms_off:
                bad_ms.append((name, ms_on, ms_off))
    ok = checked == 20 and not (bad_ratio or bad_ms or bad_grid)
    line = (
        f"A3 graph dynamics on 16x16+25x25: {checked - len(bad_ratio) - len(bad_ms) - len(bad_grid)}"
        f"/{checked} puzzles have size(on) <= 25% size(off), cheaper final-quartile "
        f"iterations, identical grids"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 4: thread scaling on a 25x25 dynamics-off run --------------


def test_a4_four_thread_throughput():
    path = CORPUS / "s25_01.txt"
    puzzle = parse_puzzle(path.read_text())

    def best_throughput(threads: int) -> float:
        best = 0.0
        for _ in range(3):
            config = EngineConfig(max_iterations=20_000, thread_count=threads)
            stats = solve(puzzle, config, dynamics=False).stats
            seconds = stats["solve_ms"] / 1e3
            best = max(best, stats["iterations"] / seconds if seconds > 0 else 0.0)
        return best

    one = best_throughput(1)
    four = best_throughput(4)
    ratio = four / one if one > 0 else 0.0
    ok = ratio >= 2.0
    line = (
        f"A4 thread scaling 25x25 dynamics-off: 4-thread throughput is {ratio:.2f}x "
        f"the 1-thread rate (needs >= 2.0x)"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 5: hundred circles at grid-feasible radius, ten seeds ------


def test_a5_packing_feasibility_ten_seeds():
    failures = []
    worst_seconds = 0.0
    for seed in range(10):
        res = pack(100, 0.05, seed=seed)
        seconds = res.solve_ms / 1e3
        worst_seconds = max(worst_seconds, seconds)
        if not (
            res.converged
            and res.max_overlap_depth <= 1e-6
            and res.max_box_violation <= 1e-9
            and seconds <= 60.0
        ):
            failures.append((seed, res.converged, res.max_overlap_depth, seconds))
    ok = not failures
    line = (
        f"A5 packing n=100 r=0.05: {10 - len(failures)}/10 seeds converge with overlap "
        f"<= 1e-6 and box slack <= 1e-9, worst {worst_seconds:.1f}s (budget 60s)"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 6: active pair set stays linear in n -----------------------


def test_a6_active_set_linearity():
    failures = []
    peaks = {}
    for n in (100, 400, 1000):
        radius = radius_for_density(n, 0.6)
        res = pack(n, radius, seed=0)
        peaks[n] = res.peak_active_factors
        if not (res.converged and res.peak_active_factors <= 12 * n):
            failures.append((n, res.peak_active_factors))
    full = 1000 * 999 // 2
    sparse = peaks.get(1000, full) < 0.05 * full
    ok = not failures and sparse
    line = (
        f"A6 active-set linearity at density 0.6: peaks "
        f"{', '.join(f'n={n}: {peaks[n]} (cap {12 * n})' for n in peaks)}; "
        f"n=1000 uses {100.0 * peaks.get(1000, full) / full:.2f}% of the full pair set"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 7: desk-scale stand-in for the record results --------------


def test_a7_thousand_circles_dense():
    radius = radius_for_density(1000, 0.70)
    failures = []
    worst_seconds = 0.0
    for seed in range(3):
        res = pack(1000, radius, seed=seed)
        seconds = res.solve_ms / 1e3
        worst_seconds = max(worst_seconds, seconds)
        if not (res.converged and res.feasible and seconds <= 600.0):
            failures.append((seed, res.converged, res.feasible, seconds))
    ok = not failures
    line = (
        f"A7 n=1000 at density 0.70: {3 - len(failures)}/3 seeds converge feasibly, "
        f"worst {worst_seconds:.1f}s (budget 600s)"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 8: oracle equivalences and invariant suites ----------------


def _one_on_sweep(draws: int) -> int:
    rng = np.random.default_rng(12345)
    mismatches = 0
    for _ in range(draws):
        k = int(rng.integers(2, 10))
        incoming = []
        for _ in range(k):
            if rng.random() < 0.10:
                w = math.inf
            else:
                w = float(rng.uniform(0.05, 3.0))  # no zero weights: ties break argmin uniqueness
            incoming.append((float(rng.random()), w))
        pinned = bool(rng.random() < 0.08)
        truth = one_on_oracle(incoming, pinned, 1.0)
        if truth is None:
            try:
                one_on_minimize(incoming, pinned_on=pinned)
                mismatches += 1
            except InfeasibleCertainty:
                pass
            continue
        out = one_on_minimize(incoming, pinned_on=pinned)
        xs = [x for x, _ in out]
        expect = [1.0 if i == truth[0] else 0.0 for i in range(k)]
        if xs != expect:
            mismatches += 1
    return mismatches


def _pair_cost(out, n1, n2, w1, w2) -> float:
    (x1, _), (y1, _), (x2, _), (y2, _) = out
    cost = 0.5 * w1 * ((x1 - n1[0]) ** 2 + (y1 - n1[1]) ** 2)
    return cost + 0.5 * w2 * ((x2 - n2[0]) ** 2 + (y2 - n2[1]) ** 2)


def _pair_sweep(cases: int) -> int:
    rng = np.random.default_rng(54321)
    r = 0.1
    failures = 0
    checked = 0
    while checked < cases:
        n1 = (float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.3, 0.7)))
        n2 = (n1[0] + float(rng.uniform(-0.18, 0.18)), n1[1] + float(rng.uniform(-0.18, 0.18)))
        d = math.hypot(n2[0] - n1[0], n2[1] - n1[1])
        if d >= 2.0 * r or d < 1e-6:
            continue
        w1 = float(rng.uniform(0.2, 4.0))
        w2 = float(rng.uniform(0.2, 4.0))
        out = pair_minimize([(n1[0], w1), (n1[1], w1), (n2[0], w2), (n2[1], w2)], radius=r)
        _, p1, p2 = pair_oracle(n1, n2, w1, w2, r)
        cost_impl = _pair_cost(out, n1, n2, w1, w2)
        cost_oracle = _pair_cost([(p1[0], 0), (p1[1], 0), (p2[0], 0), (p2[1], 0)], n1, n2, w1, w2)
        if abs(cost_impl - cost_oracle) > 1e-9:
            failures += 1
        checked += 1
    return failures


def _rtree_sweep(sequences: int, steps: int) -> int:
    import random as pyrandom

    bad = 0
    for seq in range(sequences):
        rng = pyrandom.Random(1000 + seq)
        tree = RTree()
        model = {}
        next_id = 0
        for _ in range(steps):
            roll = rng.random()
            if roll < 0.55 or not model:
                tree.upsert(next_id, random_box(rng))
                model[next_id] = tree.box_of(next_id)
                next_id += 1
            elif roll < 0.80:
                eid = rng.choice(sorted(model))
                box = random_box(rng)
                tree.upsert(eid, box)
                model[eid] = box
            else:
                eid = rng.choice(sorted(model))
                tree.remove(eid)
                del model[eid]
        if tree.query_pairs() != brute_pairs(model):
            bad += 1
    return bad


def test_a8_oracle_equivalences():
    one_on_bad = _one_on_sweep(10_000)
    pair_bad = _pair_sweep(1_000)
    rtree_bad = _rtree_sweep(sequences=20, steps=500)

    suites_ok = True
    try:
        contract = test_engine_run.TestRunContract()
        contract.test_zero_weight_emitter_is_invisible()
        contract.test_converged_flag_is_honest()
        contract.test_edits_applied_blocks_convergence()
    except AssertionError:
        suites_ok = False

    ok = one_on_bad == 0 and pair_bad == 0 and rtree_bad == 0 and suites_ok
    line = (
        f"A8 oracle equivalences: one-on argmin exact on 10000/10000 draws "
        f"({one_on_bad} off), pair cost within 1e-9 on 1000/1000 overlaps "
        f"({pair_bad} off), r-tree pairs exact over 20x500 mutations "
        f"({rtree_bad} off), zero-weight + convergence-flag suites "
        f"{'pass' if suites_ok else 'FAIL'}"
    )
    record_criterion(ok, line)
    assert ok, line


# --- criterion 9: steering loop over the wire -----------------------------


def _steer_neutrality() -> bool:
    config = EngineConfig(epsilon_convergence=1e-6, max_iterations=5000, rng_seed=5)
    headless = pack(100, 0.03, seed=5, config=config)
    svc = serve_packing(100, 0.03, seed=5, port=0, config=config)
    client = Client(svc.port)
    thread = threading.Thread(target=svc.serve, kwargs={"max_sessions": 1}, daemon=True)
    try:
        thread.start()
        client.wait_for(lambda f: isinstance(f, Snapshot) and f.converged)
        thread.join(timeout=60)
        return (
            not thread.is_alive()
            and svc.telemetry.commands_applied == 0
            and list(svc.maintenance.telemetry) == list(headless.telemetry)
            and svc.maintenance.x.tobytes() == headless.x.tobytes()
            and svc.maintenance.y.tobytes() == headless.y.tobytes()
        )
    finally:
        svc.stop()
        client.close()
        thread.join(timeout=10)


def _steer_drag_path() -> tuple[int, int]:
    """Waypoints tracked within 1e-2 a little after each move lands."""
    hits = 0
    waypoints = [(0.2, 0.2), (0.5, 0.8), (0.8, 0.3)]
    with running_service(100, 0.03, seed=5) as (svc, _):
        client = Client(svc.port)
        try:
            client.wait_for(SNAP)
            client.send(DragStart(id=7))
            for wx, wy in waypoints:
                mark = client.wait_for(SNAP)
                client.send(DragMove(id=7, x=wx, y=wy))
                # commands land within 2 iterations; judge 10 iterations later
                settled = client.wait_for(
                    lambda f: isinstance(f, Snapshot) and f.iteration >= mark.iteration + 12
                )
                px, py = circle_pos(settled, 7)
                if math.hypot(px - wx, py - wy) < 1e-2:
                    hits += 1
            client.send(DragEnd(id=7))
            client.wait_for(lambda f: isinstance(f, Snapshot) and f.converged)
        finally:
            client.close()
    return hits, len(waypoints)


def _steer_vacancy() -> bool:
    with running_service(100, 0.05, seed=11) as (svc, _):
        client = Client(svc.port)
        try:
            client.send(Pause())
            snap = client.wait_for(SNAP)
            if snap.overlap_depth <= 0:
                return False
            hx, hy = open_spot(snap)
            client.send(Vacancy(x=hx, y=hy))
            client.send(Resume())
            deadline = time.monotonic() + 60
            while svc.transport.carried is None:
                if time.monotonic() > deadline:
                    return False
                time.sleep(0.005)
            carried = svc.transport.carried
            before = own_depth(svc.maintenance.x.copy(), svc.maintenance.y.copy(), 0.05, carried)
            while svc.transport.carried is not None:
                if time.monotonic() > deadline:
                    return False
                time.sleep(0.005)
            end_iter = svc._iteration
            after = client.wait_for(
                lambda f: isinstance(f, Snapshot) and f.iteration >= end_iter
            )
            depth_after = own_depth(
                np.array([after.circles[i + 1] for i in range(0, len(after.circles), 3)]),
                np.array([after.circles[i + 2] for i in range(0, len(after.circles), 3)]),
                0.05,
                carried,
            )
            return before > 0 and depth_after < before
        finally:
            client.close()


def test_a9_steering_loop():
    neutrality = _steer_neutrality()
    hits, total = _steer_drag_path()
    vacancy = _steer_vacancy()
    ok = neutrality and hits == total and vacancy
    line = (
        f"A9 steering loop (scripted TCP client, no UI): drag tracked "
        f"{hits}/{total} waypoints within 1e-2, vacancy burst "
        f"{'reduced' if vacancy else 'DID NOT reduce'} the carried circle's overlap, "
        f"idle-client telemetry {'byte-identical' if neutrality else 'DIVERGED'} "
        f"from the headless run"
    )
    record_criterion(ok, line)
    assert ok, line
