"""Command-line entry point: ``evroute solve | oracle | verify | gen | bench``.

Exit codes: 0 success, 1 verification mismatch, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import io
from .generators import KINDS, GeneratorError, GenSpec, generate
from .graph import EnergyGraphError
from .oracle import (
    OracleTooLargeError,
    audit_table,
    compare_tables,
    oracle_alpha_all_pairs,
    oracle_min_initial,
)
from .scaling import BENCH_CONFIG, growth_exponent, time_solver
from .stage1 import EngineConfig
from .stage2 import beta_from_reversed, solve_alpha

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
SEED_ENV = "EVROUTE_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        print(f"evroute: {SEED_ENV} must be an integer, got {raw!r}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def _config(args) -> EngineConfig:
    return EngineConfig(seed=args.seed, exhaustive=args.exhaustive,
                        witnesses=getattr(args, "witnesses", False))


def _solve_table(graph, config: EngineConfig, beta: bool):
    """The requested table plus the run whose shortcut table produced it.

    For ``beta`` the solver runs on the reversed graph, so that is the graph
    the shortcut witnesses live in.
    """
    if beta:
        run = solve_alpha(graph.reversed(), config)
        return beta_from_reversed(run.alpha, graph.B), run, graph.reversed()
    run = solve_alpha(graph, config)
    return run.alpha, run, graph


def cmd_solve(args) -> int:
    graph = io.load_graph(args.input)
    config = _config(args)
    table, run, solved = _solve_table(graph, config, args.beta)
    io.save_table(table, args.output)
    if args.witnesses:
        failures = audit_table(solved, run.table, config.witness_cap)
        print(f"witness audit: {len(failures)} failures over "
              f"{int(np.isfinite(run.table.M).sum())} shortcut entries")
        for f in failures[:20]:
            print(f"  M{f.key}: {f.reason}")
        if failures:
            return EXIT_MISMATCH
    return EXIT_OK


def cmd_oracle(args) -> int:
    graph = io.load_graph(args.input)
    table = oracle_min_initial(graph) if args.beta else oracle_alpha_all_pairs(graph)
    io.save_table(table, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    graph = io.load_graph(args.input)
    truth = oracle_min_initial(graph) if args.beta else oracle_alpha_all_pairs(graph)
    base = _config(args)
    sound_all = True
    exact_runs = 0
    for run in range(args.runs):
        config = replace(base, seed=args.seed + run)
        table, _, _ = _solve_table(graph, config, args.beta)
        cmp = compare_tables(table, truth, beta=args.beta)
        exact_runs += cmp.exact
        sound_all &= cmp.sound
        status = "exact" if cmp.exact else ("sound" if cmp.sound else "UNSOUND")
        print(f"run {run} seed {config.seed}: {status}")
        for label, rows in (("unsound", cmp.unsound), ("missed", cmp.missed)):
            for s, t, got, want in rows:
                print(f"  {label} ({s + 1}, {t + 1}): solver {io.format_value(got)}, "
                      f"oracle {io.format_value(want)}")
    share = exact_runs / args.runs
    print(f"sound in all runs: {sound_all}; exact in {exact_runs}/{args.runs} runs")
    ok = sound_all and share >= args.min_exact
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_gen(args) -> int:
    try:
        gains = tuple(int(x) for x in args.gains.split(",")) if args.gains else ()
        spec = GenSpec(kind=args.kind, n=args.n, density=args.density,
                       gain_bound=args.gain_bound,
                       B=args.capacity, seed=args.seed,
                       gains=gains)
        graph = generate(spec)
    except (GeneratorError, EnergyGraphError, ValueError) as exc:
        print(f"gen: {exc}", file=sys.stderr)
        return EXIT_USAGE
    io.save_graph(graph, args.output, comment=f"generated by evroute gen: {spec.kind} seed {spec.seed}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    config = BENCH_CONFIG if args.profile == "bench" else EngineConfig()
    timings = time_solver(sizes, seed=args.seed, config=replace(config, seed=args.seed))
    for t in timings:
        print(f"n={t.n}\t{t.seconds:.3f}s")
    if len(timings) >= 2:
        print(f"growth exponent: {growth_exponent(timings):.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evroute", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    def solver_flags(p):
        p.add_argument("--input", required=True)
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--exhaustive", action="store_true",
                       help="replace every sampled vertex set by the full vertex set")
        p.add_argument("--beta", action="store_true",
                       help="minimum initial charge instead of maximum final charge")

    p = sub.add_parser("solve", help="all-pairs table from the two-stage solver")
    solver_flags(p)
    p.add_argument("--output", required=True)
    p.add_argument("--witnesses", action="store_true",
                   help="record provenance and audit every shortcut entry")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="all-pairs table from brute force")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beta", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="compare solver runs with the oracle")
    solver_flags(p)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--min-exact", type=float, default=1.0,
                   help="fraction of runs that must match exactly (default 1.0)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a generated instance")
    p.add_argument("--kind", choices=KINDS, default="random")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--gain-bound", type=int, default=None, help="defaults to the capacity")
    p.add_argument("--capacity", type=int, default=12)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--gains", default="", help="comma-separated arc gains for --kind funnel")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="time the solver on dense random instances")
    p.add_argument("--sizes", default="16,32,64")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--profile", choices=("bench", "default"), default="bench",
                   help="engine settings: the light benchmark profile or the full defaults")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "runs", 1) < 1:
        parser.error("--runs must be at least 1")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"evroute: {exc}", file=sys.stderr)
        return EXIT_IO
    except io.InstanceFormatError as exc:
        print(f"evroute: {args.input}: {exc}", file=sys.stderr)
        return EXIT_IO
    except OracleTooLargeError as exc:
        print(f"evroute: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
