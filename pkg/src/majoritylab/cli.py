"""Command-line interface.

Subcommands: gen, run, analyze, oracle, experiment, verify.  Every
invocation echoes its fully resolved configuration (including defaulted
values and seeds) before doing work.  Exit codes: 0 success, 1 threshold
or verdict failure, 2 usage error.

The MAJORITYLAB_OUT environment variable sets the default output
directory (falls back to the current directory).
"""

import argparse
import json
import os
import sys

from . import acceptance, analysis, harness, oracle
from .dynamics import Schedule, SignalAssignment, StopCondition, run
from .errors import MajorityLabError
from .graphs import (
    gen_balanced_mary,
    gen_baseline,
    gen_pa_clock,
    gen_preferential_attachment,
    gen_random_recursive,
    read_edge_list,
    root_at,
    write_edge_list,
)
from .traceio import read_trace_jsonl, write_trace_jsonl

FAMILIES = ("pa", "pa_clock", "rrt", "mary", "line", "star", "complete")


def _outdir():
    return os.environ.get("MAJORITYLAB_OUT", ".")


def _resolve_out(path):
    if path is None:
        return None
    if os.path.isabs(path) or os.path.dirname(path):
        return path
    return os.path.join(_outdir(), path)


def _echo_config(args):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"# config {json.dumps(resolved, default=str)}")


def _build_graph(args):
    family = args.family
    if family is None:
        raise MajorityLabError("--family is required")
    if family == "pa":
        return gen_preferential_attachment(args.n, args.seed)
    if family == "pa_clock":
        return gen_pa_clock(args.n, args.seed)
    if family == "rrt":
        return gen_random_recursive(args.n, args.seed)
    if family == "mary":
        if args.depth is None:
            raise MajorityLabError("--depth is required for the mary family")
        return gen_balanced_mary(args.m_ary, args.depth)
    return gen_baseline(family, args.n)


def _cmd_gen(args):
    g = _build_graph(args)
    out = _resolve_out(args.out)
    if out is None:
        raise MajorityLabError("--out is required for gen")
    with open(out, "w") as fh:
        write_edge_list(g, fh)
    print(f"wrote {g!r} to {out}")
    return 0


def _load_graph(path):
    with open(path) as fh:
        return read_edge_list(fh)


def _cmd_run(args):
    g = _load_graph(args.graph)
    signals = SignalAssignment.sample(g.n, args.delta, args.seed, args.trial)
    schedule = Schedule.seeded(args.seed, args.trial)
    stop = None
    if args.max_steps is not None:
        stop = StopCondition(max_steps=args.max_steps)
    trace = run(g, signals, schedule, stop=stop, snapshot_at=args.measure_at)
    out = _resolve_out(args.out)
    if out is None:
        raise MajorityLabError("--out is required for run")
    with open(out, "w") as fh:
        write_trace_jsonl(trace, fh)
    print(
        f"steps={trace.final_state.t} stabilization_step={trace.stabilization_step} "
        f"truncated={trace.truncated} -> {out}"
    )
    return 0


def _cmd_analyze(args):
    graph = _load_graph(args.graph) if args.graph else None
    with open(args.trace) as fh:
        trace = read_trace_jsonl(fh, graph=graph)
    if trace.graph is None:
        raise MajorityLabError("analyze needs --graph to resolve the tree structure")
    checks = args.check or ["critical-chain"]
    failed = False
    for check in checks:
        if check == "critical-chain":
            verdict = analysis.verify_critical_chain(trace)
            ok = bool(verdict)
            print(f"critical-chain: {'ok' if ok else f'violation {verdict.violation}'}")
        elif check == "critical-table":
            table = analysis.critical_times(trace, args.source)
            print(f"critical-table source={args.source}:")
            for v, t in enumerate(table.times):
                print(f"  T({args.source},{v}) = {int(t)}")
            ok = True
        elif check == "finalization":
            rooting = root_at(trace.graph, args.source)
            report = analysis.finalization_report(trace, rooting)
            bad = sum(
                1
                for v in range(trace.graph.n)
                if report.nearly_finalized_at[v] != analysis.UNDEFINED
                and report.t_v[v] != analysis.UNDEFINED
                and report.nearly_finalized_at[v] > report.t_v[v]
            )
            ok = bad == 0
            print(f"finalization: {'ok' if ok else f'{bad} nodes past their T_v'}")
        else:
            raise MajorityLabError(f"unknown check {check!r}")
        failed = failed or not ok
    return 1 if failed else 0


def _cmd_oracle(args):
    g = _build_graph(args)
    if args.mode == "absorption":
        result = oracle.exact_absorption(g, args.delta)
        print(f"p_correct_majority = {result.p_correct_majority:.9f}")
        print(f"p_consensus = {result.p_consensus:.9f}")
        print(f"p_correct_consensus = {result.p_correct_consensus:.9f}")
        print(f"expected_stabilization_step = {result.expected_stabilization_step:.6f}")
        out = _resolve_out(args.out)
        if out:
            oracle.save_result(result, out)
            print(f"wrote oracle result to {out}")
    else:
        import numpy as np

        from . import rng as rngmod

        gen = rngmod.stream(args.seed, rngmod.EXPERIMENT)
        ok = True
        for _ in range(args.trials):
            sched = [int(x) for x in gen.integers(0, g.n, size=4 * g.n)]
            verdict = oracle.exhaustive_boolean_check(g, sched, args.delta)
            ok = ok and verdict.ok
        print(f"boolean-structure: {'ok' if ok else 'violated'}")
        if not ok:
            return 1
    return 0


def _cmd_experiment(args):
    if args.config:
        cfg = harness.ExperimentConfig.from_file(args.config)
    else:
        if args.family is None:
            raise MajorityLabError("experiment needs --config or --family")
        cfg = harness.ExperimentConfig(
            name=args.name,
            family=args.family,
            n=args.n,
            delta=args.delta,
            trials=args.trials,
            seed=args.seed,
            m_ary=args.m_ary,
            depth=args.depth,
            max_steps=args.max_steps,
            measure_at=args.measure_at,
            workers=args.workers,
        )
    if cfg.output_dir is None:
        cfg.output_dir = _outdir()
    print(f"# experiment {json.dumps(harness.asdict(cfg))}")
    if args.measure == "majority-at-T":
        result = harness.majority_at_T(cfg)
    elif args.measure == "stabilization":
        result = harness.stabilization_stats(cfg)
    else:
        result = harness.run_experiment(cfg)
    harness.write_result(result)
    print(json.dumps(result.aggregate, indent=1))
    return 0 if result.passed else 1


def _cmd_verify(args):
    numbers = set(args.only) if args.only else None
    results, ok = acceptance.run_all(numbers=numbers, stream=sys.stdout)
    print(f"{'ALL PASS' if ok else 'FAILURES'} ({sum(r.ok for r in results)}/{len(results)})")
    return 0 if ok else 1


def _add_graph_flags(p):
    p.add_argument("--family", choices=FAMILIES, help="graph family")
    p.add_argument("--n", type=int, default=100, help="node count (arrivals for pa)")
    p.add_argument("--m-ary", dest="m_ary", type=int, default=2, help="branching factor")
    p.add_argument("--depth", type=int, help="tree depth for the mary family")
    p.add_argument("--seed", type=int, default=0, help="master seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="majoritylab",
        description="Simulation laboratory for asynchronous majority dynamics on trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a graph and write an edge list")
    _add_graph_flags(p)
    p.add_argument("--out", required=True, help="output edge-list path")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("run", help="execute one seeded run and write a trace")
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--delta", type=float, default=0.3, help="signal bias offset")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--trial", type=int, default=0, help="trial index for RNG streams")
    p.add_argument("--max-steps", dest="max_steps", type=int, help="step budget")
    p.add_argument("--measure-at", dest="measure_at", type=int, help="snapshot step")
    p.add_argument("--out", required=True, help="output trace path (json lines)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("analyze", help="analyze a recorded trace")
    p.add_argument("--trace", required=True, help="trace file from `run`")
    p.add_argument("--graph", help="edge-list file the trace was recorded on")
    p.add_argument(
        "--check",
        action="append",
        choices=["critical-chain", "critical-table", "finalization"],
        help="analysis to apply (repeatable; default critical-chain)",
    )
    p.add_argument("--source", type=int, default=0, help="source/root node")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("oracle", help="exact analysis of a small graph")
    _add_graph_flags(p)
    p.add_argument("--delta", type=float, default=0.3, help="signal bias offset")
    p.add_argument(
        "--mode",
        choices=["absorption", "boolean"],
        default="absorption",
        help="absorption probabilities or exhaustive Boolean-structure check",
    )
    p.add_argument("--trials", type=int, default=20, help="schedules for boolean mode")
    p.add_argument("--out", help="write the oracle result as JSON")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    _add_graph_flags(p)
    p.add_argument("--name", default="experiment", help="experiment name")
    p.add_argument("--delta", type=float, default=0.3, help="signal bias offset")
    p.add_argument("--trials", type=int, default=100, help="trial count")
    p.add_argument("--max-steps", dest="max_steps", type=int, help="step budget")
    p.add_argument("--measure-at", dest="measure_at", type=int, help="measurement step")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--config", help="JSON or TOML experiment config file")
    p.add_argument(
        "--measure",
        choices=["default", "majority-at-T", "stabilization"],
        default="default",
        help="measurement applied per trial",
    )
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("verify", help="run the full acceptance gate")
    p.add_argument(
        "--only", type=int, action="append", help="criterion number (repeatable)"
    )
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    _echo_config(args)
    try:
        return args.func(args)
    except MajorityLabError as exc:
        extra = ""
        if getattr(exc, "offset", None) is not None:
            extra = f" (byte offset {exc.offset})"
        print(f"error: {exc}{extra}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
