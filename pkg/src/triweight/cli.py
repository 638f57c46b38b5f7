"""Command line front end: solve puzzles, pack circles, benchmark, serve.

Reports come in two shapes. text is for people: the result, a short
summary, wall-clock lines prefixed with [timing]. json-lines is for
machines: one JSON object per line with a "record" discriminator, and
every wall-clock measurement confined to a "timing" key so two runs with
the same flags and seed are byte-identical once those keys are masked.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .errors import Inconsistent, InfeasibleRadius, PortInUse, Unsolved
from .packing import density, format_packing, pack, radius_for_density
from .steer_service import SteerService
from .sudoku import format_grid, parse_puzzle, solve
from .twa_engine import EngineConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSOLVED = 2  # budget ran out, or the output is not feasible
EXIT_IMPOSSIBLE = 3  # contradictory puzzle, or circles that cannot fit


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract here reserves 2 for
    # unsolved runs, so usage problems leave through 1 instead
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_threads() -> int | None:
    raw = os.environ.get("TWA_THREADS")
    if raw is None:
        return None
    try:
        value = int(raw)
        if value < 1:
            raise ValueError
    except ValueError:
        raise SystemExit(EXIT_USAGE) from None
    return value


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = _default_threads()
    return env if env is not None else 1


class Report:
    """Streams one run's records to a writable in the chosen shape."""

    def __init__(self, mode: str, out):
        self.mode = mode
        self.out = out

    def emit(self, obj: dict) -> None:
        if self.mode == "json-lines":
            self.out.write(json.dumps(obj, separators=(",", ":")) + "\n")

    def say(self, line: str = "") -> None:
        if self.mode == "text":
            self.out.write(line + "\n")


# --- sudoku ---------------------------------------------------------------


def cmd_sudoku(args, out) -> int:
    threads = _resolve_threads(args)
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        print(f"twa sudoku: cannot read {args.file}: {exc}", file=sys.stderr)
        print("usage: twa sudoku --file PATH [--dynamics on|off] ...", file=sys.stderr)
        return EXIT_USAGE
    try:
        puzzle = parse_puzzle(text)
    except ValueError as exc:
        print(f"twa sudoku: bad puzzle file: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report = Report(args.report, out)
    config = EngineConfig(
        epsilon_convergence=args.epsilon,
        max_iterations=args.max_iters,
        thread_count=threads,
        rng_seed=args.seed,
    )
    report.emit(
        {
            "record": "run",
            "task": "sudoku",
            "config": {
                "file": str(args.file),
                "n": puzzle.n,
                "dynamics": args.dynamics,
                "threads": threads,
                "max_iters": args.max_iters,
                "epsilon": args.epsilon,
                "seed": args.seed,
            },
        }
    )
    report.say(
        f"task: sudoku  n: {puzzle.n}  file: {args.file}  "
        f"dynamics: {args.dynamics}  threads: {threads}  seed: {args.seed}"
    )

    def on_status(status):
        report.emit(
            {
                "record": "iteration",
                "iteration": status.iteration,
                "new_certain": status.new_certain,
                "edits_applied": status.edits_applied,
                "live_variables": status.live_variables,
                "live_factors": status.live_factors,
                "live_edges": status.live_edges,
                "max_message_delta": status.max_message_delta,
                "timing": {"phase_us": status.phase_us},
            }
        )

    try:
        solution = solve(puzzle, config, dynamics=args.dynamics == "on", on_status=on_status)
    except Unsolved as exc:
        report.emit(
            {"record": "summary", "task": "sudoku", "solved": False, "error": str(exc)}
        )
        report.say(f"unsolved: {exc}")
        return EXIT_UNSOLVED
    except Inconsistent as exc:
        report.emit(
            {"record": "summary", "task": "sudoku", "solved": False, "error": str(exc)}
        )
        report.say(f"inconsistent: {exc}")
        return EXIT_IMPOSSIBLE

    stats = solution.stats
    size = stats["final_variables"] + stats["final_factors"] + stats["final_edges"]
    report.emit(
        {
            "record": "grid",
            "n": puzzle.n,
            "rows": solution.grid,
        }
    )
    report.emit(
        {
            "record": "summary",
            "task": "sudoku",
            "solved": True,
            "iterations": stats["iterations"],
            "propagation_iterations": stats["propagation_iterations"],
            "numeric_iterations": stats["numeric_iterations"],
            "final_variables": stats["final_variables"],
            "final_factors": stats["final_factors"],
            "final_edges": stats["final_edges"],
            "final_graph_size": size,
            "threads": threads,
            "timing": {
                "solve_seconds": stats["solve_ms"] / 1e3,
                "ms_per_iteration": stats["ms_per_iter"],
            },
        }
    )
    report.say()
    report.say(format_grid(puzzle.n, {
        (r, c): solution.grid[r][c] for r in range(puzzle.n) for c in range(puzzle.n)
    }))
    report.say(
        f"solved in {stats['iterations']} iterations "
        f"({stats['propagation_iterations']} propagation, "
        f"{stats['numeric_iterations']} numeric search)"
    )
    report.say(
        f"final graph: {stats['final_variables']} variables, "
        f"{stats['final_factors']} factors, {stats['final_edges']} edges "
        f"(size {size})"
    )
    report.say(
        f"[timing] solve seconds: {stats['solve_ms'] / 1e3:.3f}  "
        f"ms/iteration: {stats['ms_per_iter']:.3f}"
    )
    return EXIT_OK


# --- pack -----------------------------------------------------------------


def cmd_pack(args, out) -> int:
    threads = _resolve_threads(args)
    n = args.circles
    try:
        radius = args.radius if args.radius is not None else radius_for_density(n, args.density)
    except (InfeasibleRadius, ValueError) as exc:
        print(f"twa pack: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE if isinstance(exc, InfeasibleRadius) else EXIT_USAGE

    if args.serve:
        return _serve_pack(args, n, radius, threads)

    report = Report(args.report, out)
    config = EngineConfig(
        epsilon_convergence=1e-6,
        max_iterations=args.max_iters,
        thread_count=threads,
        rng_seed=args.seed,
    )
    report.emit(
        {
            "record": "run",
            "task": "pack",
            "config": {
                "circles": n,
                "radius": radius,
                "density": density(n, radius),
                "buffer": args.buffer,
                "threads": threads,
                "max_iters": args.max_iters,
                "seed": args.seed,
                "out": str(args.out) if args.out else None,
            },
        }
    )
    report.say(
        f"task: pack  circles: {n}  radius: {radius:.9g}  "
        f"density: {density(n, radius):.4f}  threads: {threads}  seed: {args.seed}"
    )

    final_sizes = {"variables": 0, "factors": 0, "edges": 0}

    def on_status(status, maintenance):
        row = maintenance.telemetry[-1]
        final_sizes["variables"] = status.live_variables
        final_sizes["factors"] = status.live_factors
        final_sizes["edges"] = status.live_edges
        report.emit(
            {
                "record": "iteration",
                "iteration": row.iteration,
                "max_overlap_depth": row.max_overlap_depth,
                "active_factors": row.active_factors,
                "pool_size": row.pool_size,
                "timing": {"phase_us": status.phase_us},
            }
        )

    try:
        result = pack(
            n,
            radius,
            seed=args.seed,
            config=config,
            buffer_fraction=args.buffer,
            on_status=on_status,
        )
    except InfeasibleRadius as exc:
        print(f"twa pack: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except ValueError as exc:
        print(f"twa pack: {exc}", file=sys.stderr)
        return EXIT_USAGE

    packing_text = format_packing(n, radius, result.x, result.y)
    if args.out:
        Path(args.out).write_text(packing_text)

    report.emit(
        {
            "record": "circles",
            "n": n,
            "radius": radius,
            "rows": [[i, float(result.x[i]), float(result.y[i])] for i in range(n)],
        }
    )
    report.emit(
        {
            "record": "summary",
            "task": "pack",
            "converged": result.converged,
            "feasible": result.feasible,
            "iterations": result.iterations,
            "max_overlap_depth": result.max_overlap_depth,
            "max_box_violation": result.max_box_violation,
            "peak_active_factors": result.peak_active_factors,
            "pool_size": result.pool_size,
            "factors_created": result.factors_created,
            "final_variables": final_sizes["variables"],
            "final_factors": final_sizes["factors"],
            "final_edges": final_sizes["edges"],
            "final_graph_size": sum(final_sizes.values()),
            "threads": threads,
            "timing": {
                "solve_seconds": result.solve_ms / 1e3,
                "ms_per_iteration": (
                    result.solve_ms / result.iterations if result.iterations else 0.0
                ),
            },
        }
    )
    if args.out:
        report.say(f"packing written to {args.out}")
    else:
        report.say()
        report.say(packing_text.rstrip("\n"))
    report.say(
        f"{'converged' if result.converged else 'stopped at budget'} "
        f"after {result.iterations} iterations; "
        f"{'feasible' if result.feasible else 'NOT feasible'} "
        f"(worst overlap {result.max_overlap_depth:.3g}, "
        f"worst box violation {result.max_box_violation:.3g})"
    )
    report.say(
        f"pair factors: peak {result.peak_active_factors} active, "
        f"{result.pool_size} pooled, {result.factors_created} created"
    )
    report.say(
        f"[timing] solve seconds: {result.solve_ms / 1e3:.3f}  "
        f"ms/iteration: "
        f"{result.solve_ms / result.iterations if result.iterations else 0.0:.3f}"
    )
    return EXIT_OK if result.converged and result.feasible else EXIT_UNSOLVED


def _serve_pack(args, n: int, radius: float, threads: int) -> int:
    config = EngineConfig(
        epsilon_convergence=1e-6,
        max_iterations=args.max_iters,
        thread_count=threads,
        rng_seed=args.seed,
    )
    try:
        service = SteerService(
            n,
            radius,
            seed=args.seed,
            config=config,
            buffer_fraction=args.buffer,
            port=args.port,
            snapshot_every=args.snapshot_every,
        )
    except InfeasibleRadius as exc:
        print(f"twa pack: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except ValueError as exc:
        print(f"twa pack: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PortInUse as exc:
        print(f"twa pack: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(
        f"serving {n} circles (r={radius:.9g}) on {service.host}:{service.port}",
        file=sys.stderr,
        flush=True,
    )
    try:
        service.serve()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return EXIT_OK


# --- bench ----------------------------------------------------------------


def _default_corpus() -> Path:
    return Path(str(resources.files("triweight").joinpath("corpus")))


def _thread_sweep(k: int) -> list[int]:
    # powers of two up to k, always ending at k itself
    sweep = []
    t = 1
    while t < k:
        sweep.append(t)
        t *= 2
    sweep.append(k)
    return sweep


def _size_class(n: int) -> str:
    return f"{n}x{n}"


def cmd_bench(args, out) -> int:
    threads_max = _resolve_threads(args)
    corpus = Path(args.corpus) if args.corpus else _default_corpus()
    if not corpus.is_dir():
        print(f"twa bench: corpus directory not found: {corpus}", file=sys.stderr)
        return EXIT_USAGE
    files = sorted(corpus.glob("*.txt"))
    if not files:
        print(f"twa bench: no puzzle files in {corpus}", file=sys.stderr)
        return EXIT_USAGE

    puzzles = []
    per_class_seen: dict[str, int] = {}
    for path in files:
        try:
            puzzle = parse_puzzle(path.read_text())
        except (OSError, ValueError) as exc:
            print(f"twa bench: skipping {path.name}: {exc}", file=sys.stderr)
            continue
        cls = _size_class(puzzle.n)
        per_class_seen[cls] = per_class_seen.get(cls, 0) + 1
        if args.limit and per_class_seen[cls] > args.limit:
            continue
        puzzles.append((path, puzzle, cls))

    sweep = _thread_sweep(threads_max)
    report = Report(args.report, out)
    report.emit(
        {
            "record": "run",
            "task": "bench",
            "config": {
                "corpus": str(corpus),
                "threads": threads_max,
                "thread_sweep": sweep,
                "seed": args.seed,
                "limit": args.limit,
                "puzzles": len(puzzles),
            },
        }
    )
    report.say(
        f"task: bench  corpus: {corpus}  puzzles: {len(puzzles)}  "
        f"threads: {sweep}  seed: {args.seed}"
    )

    # one untimed solve first: kernel compilation otherwise lands in the
    # first timed row and skews every comparison against it
    warm = min(puzzles, key=lambda triple: triple[1].n)
    try:
        solve(warm[1], EngineConfig(max_iterations=args.max_iters, rng_seed=args.seed))
    except (Unsolved, Inconsistent):
        pass

    runs = []
    for path, puzzle, cls in puzzles:
        for dynamics in ("on", "off"):
            for threads in sweep:
                config = EngineConfig(
                    max_iterations=args.max_iters,
                    thread_count=threads,
                    rng_seed=args.seed,
                )
                record = {
                    "record": "bench_run",
                    "file": path.name,
                    "size_class": cls,
                    "dynamics": dynamics,
                    "threads": threads,
                    "solved": False,
                    "iterations": 0,
                    "final_graph_size": 0,
                    "error": None,
                    "timing": {"solve_seconds": 0.0, "ms_per_iteration": 0.0},
                }
                try:
                    sol = solve(puzzle, config, dynamics=dynamics == "on")
                except (Unsolved, Inconsistent) as exc:
                    record["error"] = f"{type(exc).__name__}: {exc}"
                else:
                    st = sol.stats
                    record["solved"] = True
                    record["iterations"] = st["iterations"]
                    record["final_graph_size"] = (
                        st["final_variables"] + st["final_factors"] + st["final_edges"]
                    )
                    record["timing"] = {
                        "solve_seconds": st["solve_ms"] / 1e3,
                        "ms_per_iteration": st["ms_per_iter"],
                    }
                runs.append(record)
                report.emit(record)

    # the dynamics comparison reads the single-thread runs
    classes = sorted({cls for _, _, cls in puzzles}, key=lambda c: int(c.split("x")[0]))
    class_rows = []
    for cls in classes:
        for dynamics in ("on", "off"):
            group = [
                r
                for r in runs
                if r["size_class"] == cls
                and r["dynamics"] == dynamics
                and r["threads"] == 1
            ]
            solved = [r for r in group if r["solved"]]
            row = {
                "record": "bench_class",
                "size_class": cls,
                "dynamics": dynamics,
                "puzzles": len(group),
                "solved": len(solved),
                "mean_final_graph_size": (
                    sum(r["final_graph_size"] for r in solved) / len(solved)
                    if solved
                    else None
                ),
                "timing": {
                    "mean_ms_per_iteration": (
                        sum(r["timing"]["ms_per_iteration"] for r in solved) / len(solved)
                        if solved
                        else None
                    ),
                    "mean_solve_seconds": (
                        sum(r["timing"]["solve_seconds"] for r in solved) / len(solved)
                        if solved
                        else None
                    ),
                },
            }
            class_rows.append(row)
            report.emit(row)

    scaling_rows = []
    base_throughput = None
    for threads in sweep:
        group = [r for r in runs if r["threads"] == threads and r["solved"]]
        iters = sum(r["iterations"] for r in group)
        seconds = sum(r["timing"]["solve_seconds"] for r in group)
        throughput = iters / seconds if seconds > 0 else 0.0
        if base_throughput is None:
            base_throughput = throughput
        row = {
            "record": "bench_scaling",
            "threads": threads,
            "runs": len(group),
            "timing": {
                "iterations_per_second": throughput,
                "speedup": throughput / base_throughput if base_throughput else 0.0,
            },
        }
        scaling_rows.append(row)
        report.emit(row)

    if args.report == "text":
        report.say()
        report.say("dynamics comparison (single thread; timing columns vary run to run)")
        header = (
            f"{'class':>8} {'dynamics':>8} {'puzzles':>7} {'solved':>6} "
            f"{'graph size':>12} {'ms/iter*':>10} {'seconds*':>10}"
        )
        report.say(header)
        for row in class_rows:
            size = row["mean_final_graph_size"]
            ms = row["timing"]["mean_ms_per_iteration"]
            sec = row["timing"]["mean_solve_seconds"]
            report.say(
                f"{row['size_class']:>8} {row['dynamics']:>8} {row['puzzles']:>7} "
                f"{row['solved']:>6} "
                f"{size if size is None else round(size, 1):>12} "
                f"{ms if ms is None else round(ms, 3):>10} "
                f"{sec if sec is None else round(sec, 3):>10}"
            )
        report.say()
        report.say("thread scaling (all puzzles, both dynamics settings)")
        report.say(f"{'threads':>8} {'runs':>6} {'iters/sec*':>12} {'speedup*':>9}")
        for row in scaling_rows:
            report.say(
                f"{row['threads']:>8} {row['runs']:>6} "
                f"{row['timing']['iterations_per_second']:>12.1f} "
                f"{row['timing']['speedup']:>9.2f}"
            )
        report.say()
        report.say("* wall-clock columns, marked because they vary between runs")
    return EXIT_OK


# --- entry point ----------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="twa", description="Three-weight message passing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sudoku", help="solve a puzzle file")
    s.add_argument("--file", required=True, help="puzzle file path")
    s.add_argument("--dynamics", choices=("on", "off"), default="on")
    s.add_argument("--threads", type=int, default=None, help="default $TWA_THREADS or 1")
    s.add_argument("--max-iters", type=int, default=20_000)
    s.add_argument("--epsilon", type=float, default=1e-5)
    s.add_argument("--report", choices=("text", "json-lines"), default="text")
    s.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("pack", help="pack equal circles in the unit box")
    p.add_argument("--circles", type=int, required=True)
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--radius", type=float, default=None)
    size.add_argument("--density", type=float, default=None)
    p.add_argument("--buffer", type=float, default=0.05, help="box buffer fraction")
    p.add_argument("--threads", type=int, default=None, help="default $TWA_THREADS or 1")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the packing to this file")
    p.add_argument("--report", choices=("text", "json-lines"), default="text")
    p.add_argument("--serve", action="store_true", help="steer the run over TCP")
    p.add_argument("--port", type=int, default=7870, help="with --serve; 0 picks a port")
    p.add_argument("--snapshot-every", type=int, default=None, help="with --serve")

    b = sub.add_parser("bench", help="corpus benchmark, dynamics on vs off")
    b.add_argument("--corpus", default=None, help="puzzle directory (default: bundled)")
    b.add_argument("--threads", type=int, default=None, help="sweep up to this count")
    b.add_argument("--max-iters", type=int, default=20_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--limit", type=int, default=None, help="puzzles per size class")
    b.add_argument("--report", choices=("text", "json-lines"), default="text")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        if args.command == "sudoku":
            return cmd_sudoku(args, sys.stdout)
        if args.command == "pack":
            return cmd_pack(args, sys.stdout)
        return cmd_bench(args, sys.stdout)
    except SystemExit as exc:  # bad TWA_THREADS
        print("twa: TWA_THREADS must be a positive integer", file=sys.stderr)
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
