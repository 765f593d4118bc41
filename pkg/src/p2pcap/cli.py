"""Command-line interface.

Subcommands: ``sra``, ``dcda-exact``, ``dcda-heur``, ``reduce-sat``,
``gen-overlay``, ``bench``.  Exit codes: 0 success (including reports of
unsatisfiable instances), 2 usage error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, dcda, heuristics, overlay, sra
from .benders import solve_p1_benders


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="p2pcap",
        description="Capacity solvers for peer-to-peer overlays.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sra = sub.add_parser(
        "sra", help="maximal stationary-regime allocation via max flow"
    )
    p_sra.add_argument("--instance", required=True, help="instance file (p2p format)")
    p_sra.add_argument(
        "--emit-allocation",
        metavar="FILE",
        help="write 'w <u> <v> <weight>' lines plus a 'ratio' summary",
    )

    p_exact = sub.add_parser("dcda-exact", help="exact distribution-forest solvers")
    p_exact.add_argument("--instance", required=True)
    p_exact.add_argument("--source", required=True, type=int)
    p_exact.add_argument("--k", required=True, type=int, help="number of trees")
    p_exact.add_argument(
        "--method", choices=("bb", "benders", "brute"), default="bb",
        help="bb: branch and bound; benders: level decomposition (K=1); brute: exhaustive oracle",
    )
    p_exact.add_argument("--budget", type=float, default=None, help="time budget for bb (seconds)")

    p_heur = sub.add_parser("dcda-heur", help="polynomial-time distribution-forest heuristics")
    p_heur.add_argument("--instance", required=True)
    p_heur.add_argument("--source", required=True, type=int)
    p_heur.add_argument("--k", required=True, type=int)
    p_heur.add_argument(
        "--algo", required=True, choices=("greedy", "random", "prefixed", "ga")
    )
    p_heur.add_argument("--seed", required=True, type=int)
    p_heur.add_argument("--pop", type=int, default=150, help="GA population size")
    p_heur.add_argument("--gens", type=int, default=300, help="GA generations")

    p_sat = sub.add_parser(
        "reduce-sat", help="turn a 3-CNF formula into a single-tree instance"
    )
    p_sat.add_argument("--cnf", required=True, help="DIMACS CNF file, 3 literals per clause")
    p_sat.add_argument("--out", help="instance file to write (default: stdout)")

    p_gen = sub.add_parser("gen-overlay", help="generate a nearest-neighbor overlay instance")
    p_gen.add_argument("--n", required=True, type=int, help="number of sampled nodes")
    p_gen.add_argument("--kappa", required=True, type=int)
    p_gen.add_argument("--seed", required=True, type=int)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--matrix", help="latency matrix file (default: synthetic)")
    p_gen.add_argument("--matrix-size", type=int, default=2500)
    p_gen.add_argument("--cap-lo", type=int, default=2)
    p_gen.add_argument("--cap-hi", type=int, default=4)
    p_gen.add_argument("--demand", type=int, default=3)

    p_bench = sub.add_parser("bench", help="run a seeded experiment battery")
    p_bench.add_argument("--config", required=True, help="key/value config file")
    p_bench.add_argument("--out", required=True, help="output directory for CSV files")
    p_bench.add_argument("--matrix", help="latency matrix file (default: synthetic)")
    p_bench.add_argument("--jobs", type=int, default=1)
    return parser


def _print_forest(instance: dcda.DcdaInstance, forest: dcda.Forest,
                  score: float, proven: bool) -> None:
    for k, tree in enumerate(forest.parents):
        for child in sorted(tree):
            print(f"tree {k} {child} {tree[child]}")
    ratio = dcda.allocation_ratio(instance, score)
    print(f"score {score} ratio {float(ratio)} optimal {'true' if proven else 'false'}")


def _cmd_sra(args) -> int:
    graph = overlay.read_instance(args.instance)
    outcome = sra.sra_decide(graph)
    if args.emit_allocation:
        with open(args.emit_allocation, "w") as fh:
            for (u, v), w in sorted(outcome.allocation.weights.items()):
                fh.write(f"w {u} {v} {w}\n")
            fh.write(f"ratio {float(outcome.ratio)}\n")
    print(f"ratio {float(outcome.ratio)}")
    return 0


def _cmd_dcda_exact(args) -> int:
    graph = overlay.read_instance(args.instance)
    instance = dcda.DcdaInstance(graph, args.source, args.k)
    if args.method == "brute":
        result = dcda.brute_force(instance)
    elif args.method == "benders":
        result = solve_p1_benders(instance)
    else:
        result = dcda.branch_and_bound(instance, time_budget=args.budget)
    _print_forest(instance, result.forest, result.score, result.proven_optimal)
    return 0


def _cmd_dcda_heur(args) -> int:
    graph = overlay.read_instance(args.instance)
    instance = dcda.DcdaInstance(graph, args.source, args.k)
    if args.algo == "greedy":
        forest = heuristics.greedy(instance, args.seed)
    elif args.algo == "random":
        forest = heuristics.random_variant(instance, args.seed)
    elif args.algo == "prefixed":
        forest = heuristics.prefixed_variant(instance, args.seed)
    else:
        forest = heuristics.genetic(instance, args.pop, args.gens, seed=args.seed)
    _print_forest(instance, forest, forest.total_members(), proven=False)
    return 0


def _cmd_reduce_sat(args) -> int:
    text = Path(args.cnf).read_text()
    num_vars, clauses = dcda.parse_dimacs(text)
    instance, gamma = dcda.sat_to_dcda(clauses, num_vars)
    body = overlay.format_instance(instance.graph)
    if args.out:
        Path(args.out).write_text(body)
    else:
        sys.stdout.write(body)
    print(f"gamma {gamma}")
    return 0


def _cmd_gen_overlay(args) -> int:
    if args.matrix:
        matrix = overlay.read_latency_matrix(args.matrix)
    else:
        matrix = overlay.synth_latency_matrix(
            args.matrix_size, bench.derive_seed(args.seed, 0)
        )
    instance = bench.build_instance(
        matrix, args.n, args.kappa, args.cap_lo, args.cap_hi, args.demand, 1, args.seed
    )
    overlay.write_instance(instance.graph, args.out)
    print(f"wrote {args.out} (n={instance.graph.n}, edges={instance.graph.num_edges}, "
          f"source {instance.source})")
    return 0


def _cmd_bench(args) -> int:
    config = bench.parse_config_file(args.config)
    matrix = overlay.read_latency_matrix(args.matrix) if args.matrix else None
    report = bench.run_battery(config, matrix=matrix, jobs=args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / "rows.csv"
    agg_path = out_dir / "aggregates.csv"
    bench.emit_csv(report, rows_path, agg_path)
    print(f"wrote {rows_path} and {agg_path} ({len(report.rows)} rows)")
    return 0


_COMMANDS = {
    "sra": _cmd_sra,
    "dcda-exact": _cmd_dcda_exact,
    "dcda-heur": _cmd_dcda_heur,
    "reduce-sat": _cmd_reduce_sat,
    "gen-overlay": _cmd_gen_overlay,
    "bench": _cmd_bench,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (overlay.InstanceFormatError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # parse_dimacs and reduction validation report data problems;
        # everything else reaching here is a bad parameter combination
        message = str(exc)
        print(f"error: {message}", file=sys.stderr)
        if "clause" in message or "literal" in message or "cnf" in message:
            return 3
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
