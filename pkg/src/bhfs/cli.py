"""Command-line interface: ``bhfs <command> [options]``.

Every option can also come from a JSON file given with ``--config``; keys
are the option names with dashes or underscores (``budget_ms``), and
options given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .core import decode, gantt_lines, read_instance, report_perm
from .pareto import write_front

log = logging.getLogger("bhfs")


def _perm(text: str):
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _cmd_generate(args) -> int:
    paths = bench.generate_benchmark(args.out, args.master_seed, calibration=not args.no_calibration)
    for p in paths:
        print(p)
    return 0


def _method_params(args) -> dict:
    params = {}
    if args.method in ("ripg", "moig") and args.d is not None:
        params["d"] = args.d
    if args.method == "ripg" and args.loop_size is not None:
        params["loop_size"] = args.loop_size
    if args.method == "nsga2" and args.population is not None:
        params["population"] = args.population
    return params


def _cmd_solve(args) -> int:
    instance = read_instance(args.instance)
    budget = args.budget_ms
    if budget is None and args.iter_cap is None:
        budget = instance.n * instance.K * args.ms_per_unit
    archive, trace = bench.solve(instance, args.method, budget, args.seed, args.iter_cap,
                                 **_method_params(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_front(out, archive.points())
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl(), encoding="utf-8")
    if args.perms:
        with open(args.perms, "w", encoding="utf-8") as fh:
            fh.write("cmax,tec,perm\n")
            for perm, obj in sorted(archive, key=lambda e: e[1]):
                fh.write(f"{obj[0]},{obj[1]},{' '.join(map(str, perm))}\n")
    log.info("%d points, %d iterations, %.0f ms", len(archive), trace.iterations, trace.elapsed_ms)
    return 0


def _cmd_experiment(args) -> int:
    paths = sorted(Path(p) for p in args.instances)
    expanded = []
    for p in paths:
        expanded += sorted(p.glob("*.txt")) if p.is_dir() else [p]
    methods = {m: {} for m in args.methods}
    plan = bench.ExperimentPlan(
        instances=expanded,
        output_dir=Path(args.out),
        methods=methods,
        replications=args.reps,
        ms_per_unit=args.ms_per_unit,
        master_seed=args.master_seed,
        iter_cap=args.iter_cap,
        workers=args.workers,
    )
    if args.epsilon_fronts:
        for f in sorted(Path(args.epsilon_fronts).glob("*.csv")):
            plan.extra_fronts.setdefault(f.stem, {})["aug_eps"] = f
    Path(args.out).mkdir(parents=True, exist_ok=True)
    bench.write_plan(plan, Path(args.out) / "plan.json")
    results = bench.run_experiment(plan)
    failed = [r for r in results.runs if r["status"] != "ok"]
    log.info("%d runs, %d failed", len(results.runs), len(failed))
    return 1 if failed else 0


def _cmd_report(args) -> int:
    from .pareto import read_metrics

    src = Path(args.results)
    metrics = read_metrics(src / "metrics.csv")
    classes = bench.read_classes(src / "instances.csv")
    rep = bench.report(metrics, classes, args.methods)
    rep.to_csv(args.csv or src / "report.csv")
    text = rep.to_text()
    if args.text:
        Path(args.text).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _cmd_export_milp(args) -> int:
    from .exact.lpfile import emit_lp
    from .exact.milp import build_milp

    instance = read_instance(args.instance)
    model = build_milp(instance, args.objective)
    emit_lp(model, args.out)
    counts = model.counts()
    log.info("%d variables (%d binary, %d integer), %d rows", counts["variables"],
             counts["binary"], counts["integer"], counts["constraints"])
    return 0


def _cmd_epsilon_run(args) -> int:
    from .exact.epsilon import epsilon_driver

    instance = read_instance(args.instance)
    result = epsilon_driver(instance, args.cells, args.solver_cmd, args.cell_timeout_ms,
                            workdir=args.workdir, primary=args.primary,
                            payoff_timeout_ms=args.payoff_timeout_ms)
    if args.out:
        write_front(args.out, result.front)
    with open(Path(result.lp_files[0]).parent / "cells.csv", "w", encoding="utf-8") as fh:
        fh.write("cell,lower,upper,status,cmax,tec\n")
        for c in result.payoff + result.cells:
            lo, hi = c.bounds or ("", "")
            cm, te = c.point or ("", "")
            fh.write(f"{c.name},{lo},{hi},{c.status},{cm},{te}\n")
    for p in result.front:
        print(f"{p.cmax},{p.tec}")
    return 0


def _cmd_oracle(args) -> int:
    from .exact.oracle import OracleCapError, exhaustive_front

    instance = read_instance(args.instance)
    try:
        front = exhaustive_front(instance, args.mode, cap=args.cap, timing=args.timing)
    except OracleCapError as exc:
        log.error("%s", exc)
        return 2
    if args.out:
        write_front(args.out, front)
    for p in front:
        print(f"{p.cmax},{p.tec}")
    return 0


def _cmd_gantt(args) -> int:
    from .ripg import neh_makespan, neh_tec

    instance = read_instance(args.instance)
    if args.perm:
        perm = _perm(args.perm)
    elif args.neh == "tec":
        perm = neh_tec(instance)
    else:
        perm = neh_makespan(instance)
    sched = decode(instance, perm)
    rep = report_perm(instance, perm)
    lines = [f"# perm {' '.join(map(str, perm))} cmax {rep.cmax} tec {rep.tec}"]
    lines += gantt_lines(instance, sched)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhfs", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with option values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the benchmark and calibration instances")
    p.add_argument("--out", default="instances")
    p.add_argument("--master-seed", type=int, default=bench.DEFAULT_MASTER_SEED)
    p.add_argument("--no-calibration", action="store_true")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="run one method on one instance")
    p.add_argument("instance")
    p.add_argument("--method", choices=bench.METHODS, default="ripg")
    p.add_argument("--d", type=int)
    p.add_argument("--loop-size", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--budget-ms", type=int, help="wall-clock budget; default n*g*ms_per_unit")
    p.add_argument("--ms-per-unit", type=int, default=200)
    p.add_argument("--iter-cap", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="front.csv")
    p.add_argument("--trace")
    p.add_argument("--perms", help="CSV with the permutation behind each front point")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("experiment", help="all methods x replications over a set of instances")
    p.add_argument("instances", nargs="+", help="instance files or directories")
    p.add_argument("--out", default="results")
    p.add_argument("--methods", nargs="+", choices=bench.METHODS, default=list(bench.METHODS))
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--ms-per-unit", type=int, default=200)
    p.add_argument("--iter-cap", type=int)
    p.add_argument("--master-seed", type=int, default=bench.DEFAULT_MASTER_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--epsilon-fronts", help="directory of <instance>.csv fronts to add to the reference")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="tables of mean I_h and GD per (n, g, m)")
    p.add_argument("results")
    p.add_argument("--methods", nargs="+")
    p.add_argument("--csv")
    p.add_argument("--text")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("export-milp", help="write the MILP as a CPLEX-LP file")
    p.add_argument("instance")
    p.add_argument("--objective", choices=("tec", "cmax"), default="tec")
    p.add_argument("--out", default="model.lp")
    p.set_defaults(func=_cmd_export_milp)

    p = sub.add_parser("epsilon-run", help="augmented epsilon-constraint front via an external solver")
    p.add_argument("instance")
    p.add_argument("--cells", type=int, default=20)
    p.add_argument("--cell-timeout-ms", type=int, default=180_000)
    p.add_argument("--payoff-timeout-ms", type=int)
    p.add_argument("--solver-cmd", help="command with optional {lp} {sol} {timeout_s} placeholders")
    p.add_argument("--primary", choices=("cmax", "tec"), default="cmax",
                   help="objective to minimise; the other one is gridded")
    p.add_argument("--workdir")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_epsilon_run)

    p = sub.add_parser("oracle", help="exhaustive front of a tiny instance")
    p.add_argument("instance")
    p.add_argument("--mode", choices=("permutation", "full"), default="permutation")
    p.add_argument("--timing", choices=("earliest", "optimal"), default="earliest")
    p.add_argument("--cap", type=int, default=1_000_000)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("gantt", help="per-operation schedule table for plotting")
    p.add_argument("instance")
    p.add_argument("--perm", help="job order, e.g. 3,0,1,2")
    p.add_argument("--neh", choices=("cmax", "tec"), default="cmax")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gantt)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise SystemExit(f"config {args.config} must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in data.items()}
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = subparsers.choices[args.command]
    known = {a.dest for a in sub._actions} | {a.dest for a in parser._actions}
    unknown = sorted(set(defaults) - known)
    if unknown:
        raise SystemExit(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
