"""Benchmark generation, seeded experiments and result tables."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import Instance, read_instance, write_instance
from .pareto import (
    build_reference_front,
    generational_distance,
    hypervolume,
    read_front,
    write_front,
    write_metrics,
)

log = logging.getLogger(__name__)

JOB_CLASSES = (6, 8, 10, 12, 15, 20, 30, 50, 100)
STAGE_LEVELS = (2, 3, 4)
MACHINE_LEVELS = (2, 3)
SIZE_GROUPS = {"small": (6, 8, 10, 12), "medium": (15, 20, 30), "large": (50, 100)}
DEFAULT_MASTER_SEED = 20240611
METHODS = ("ripg", "nsga2", "moig")


def derive_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    g: int
    m: int
    seed: int
    id: str
    proc_range: Tuple[int, int] = (1, 99)
    energy_proc_range: Tuple[int, int] = (1, 3)
    energy_block_range: Tuple[int, int] = (5, 7)
    energy_idle_range: Tuple[int, int] = (3, 5)


def generate_instance(spec: GeneratorSpec) -> Instance:
    rng = random.Random(spec.seed)
    proc = [[rng.randint(*spec.proc_range) for _ in range(spec.g)] for _ in range(spec.n)]
    ep = [rng.randint(*spec.energy_proc_range) for _ in range(spec.g)]
    eb = [rng.randint(*spec.energy_block_range) for _ in range(spec.g)]
    ei = [rng.randint(*spec.energy_idle_range) for _ in range(spec.g)]
    return Instance(proc, [spec.m] * spec.g, ep, ei, eb, id=spec.id)


def benchmark_specs(master_seed: int = DEFAULT_MASTER_SEED) -> List[GeneratorSpec]:
    specs = []
    for n in JOB_CLASSES:
        for g in STAGE_LEVELS:
            for m in MACHINE_LEVELS:
                ident = f"bhfs_n{n:03d}_g{g}_m{m}"
                specs.append(GeneratorSpec(n, g, m, derive_seed(master_seed, ident), ident))
    return specs


def calibration_specs(master_seed: int = DEFAULT_MASTER_SEED) -> List[GeneratorSpec]:
    rng = random.Random(derive_seed(master_seed, "calibration"))
    specs = []
    for n in JOB_CLASSES:
        for g in STAGE_LEVELS:
            m = rng.choice(MACHINE_LEVELS)
            ident = f"cal_n{n:03d}_g{g}_m{m}"
            specs.append(GeneratorSpec(n, g, m, derive_seed(master_seed, ident), ident))
    return specs


def generate_benchmark(out_dir, master_seed: int = DEFAULT_MASTER_SEED,
                       specs: Optional[Sequence[GeneratorSpec]] = None,
                       calibration: bool = True) -> List[Path]:
    out_dir = Path(out_dir)
    paths = []
    groups = [("test", list(specs) if specs is not None else benchmark_specs(master_seed))]
    if calibration and specs is None:
        groups.append(("calibration", calibration_specs(master_seed)))
    for sub, group in groups:
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
        for spec in group:
            path = out_dir / sub / f"{spec.id}.txt"
            write_instance(generate_instance(spec), path)
            paths.append(path)
    return paths


def instance_class(instance: Instance) -> Tuple[int, int, int]:
    return instance.n, instance.K, max(instance.machines_per_stage)


def size_group(n: int) -> str:
    for name, members in SIZE_GROUPS.items():
        if n in members:
            return name
    return "small" if n < 15 else "medium" if n < 50 else "large"


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentPlan:
    instances: List[Path]
    output_dir: Path
    methods: Dict[str, dict] = field(default_factory=lambda: {m: {} for m in METHODS})
    replications: int = 10
    ms_per_unit: int = 200
    master_seed: int = DEFAULT_MASTER_SEED
    iter_cap: Optional[int] = None
    workers: int = 1
    extra_fronts: Dict[str, Dict[str, Path]] = field(default_factory=dict)

    def budget_ms(self, instance: Instance) -> int:
        return instance.n * instance.K * self.ms_per_unit


@dataclass
class ExperimentResults:
    output_dir: Path
    runs: List[dict]
    metrics: List[dict]
    classes: Dict[str, Tuple[int, int, int]]


def solve(instance: Instance, method: str, budget_ms: Optional[int], seed: int,
          iter_cap: Optional[int] = None, **params):
    """Run one method; returns ``(archive, trace)``."""
    from .baselines import MoigConfig, Nsga2Config, moig_run, nsga2_run
    from .ripg import RipgConfig, run

    common = dict(time_budget_ms=budget_ms, rng_seed=seed, iter_cap=iter_cap)
    if method == "ripg":
        return run(instance, RipgConfig(**params, **common))
    if method == "nsga2":
        return nsga2_run(instance, Nsga2Config(**params, **common))
    if method == "moig":
        return moig_run(instance, MoigConfig(**params, **common))
    raise ValueError(f"unknown method {method!r}")


def _run_task(task: dict) -> dict:
    record = {k: task[k] for k in ("instance", "method", "rep", "seed", "budget_ms")}
    try:
        instance = read_instance(task["path"])
        archive, trace = solve(instance, task["method"], task["budget_ms"], task["seed"],
                               task["iter_cap"], **task["params"])
        front_path = Path(task["front_path"])
        front_path.parent.mkdir(parents=True, exist_ok=True)
        write_front(front_path, archive.points())
        trace_path = Path(task["trace_path"])
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        trace_path.write_text(trace.to_jsonl(), encoding="utf-8")
        record.update(status="ok", elapsed_ms=round(trace.elapsed_ms, 3),
                      iterations=trace.iterations, evaluations=trace.evaluations,
                      front_size=len(archive))
    except Exception as exc:  # recorded, the experiment carries on
        log.error("run %s/%s/%s failed: %s", task["instance"], task["method"], task["rep"], exc)
        record.update(status=f"failed: {exc!r}", elapsed_ms=0, iterations=0, evaluations=0,
                      front_size=0, traceback=traceback.format_exc())
    return record


RUN_FIELDS = ["instance", "method", "rep", "seed", "budget_ms", "status", "elapsed_ms",
              "iterations", "evaluations", "front_size"]


def run_experiment(plan: ExperimentPlan) -> ExperimentResults:
    out = Path(plan.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    classes = {}
    for path in plan.instances:
        instance = read_instance(path)
        classes[instance.id] = instance_class(instance)
        for method, params in plan.methods.items():
            for rep in range(plan.replications):
                tasks.append({
                    "path": str(path),
                    "instance": instance.id,
                    "method": method,
                    "rep": rep,
                    "seed": derive_seed(plan.master_seed, instance.id, method, rep),
                    "budget_ms": plan.budget_ms(instance),
                    "iter_cap": plan.iter_cap,
                    "params": params,
                    "front_path": str(out / "fronts" / instance.id / f"{method}_rep{rep:02d}.csv"),
                    "trace_path": str(out / "traces" / instance.id / f"{method}_rep{rep:02d}.jsonl"),
                })
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            runs = list(pool.map(_run_task, tasks))
    else:
        runs = [_run_task(t) for t in tasks]

    with open(out / "runs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RUN_FIELDS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(runs)
    with open(out / "instances.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance", "n", "g", "m"])
        for ident, (n, g, m) in classes.items():
            writer.writerow([ident, n, g, m])

    metrics = compute_metrics(out, runs, plan.extra_fronts)
    write_metrics(out / "metrics.csv", metrics)
    return ExperimentResults(out, runs, metrics, classes)


def compute_metrics(out: Path, runs: Iterable[dict],
                    extra_fronts: Optional[Dict[str, Dict[str, Path]]] = None) -> List[dict]:
    """Reference front per instance from every persisted front, then I_h and GD per run."""
    out = Path(out)
    by_instance: Dict[str, List[Tuple[str, int, list]]] = defaultdict(list)
    for r in runs:
        if r["status"] != "ok":
            continue
        path = out / "fronts" / r["instance"] / f"{r['method']}_rep{r['rep']:02d}.csv"
        by_instance[r["instance"]].append((r["method"], r["rep"], read_front(path)))
    for ident, fronts in (extra_fronts or {}).items():
        for method, path in fronts.items():
            by_instance[ident].append((method, 0, read_front(path)))

    rows = []
    (out / "reference").mkdir(parents=True, exist_ok=True)
    for ident in sorted(by_instance):
        entries = by_instance[ident]
        entries = [e for e in entries if e[2]]
        if not entries:
            continue
        reference, ctx = build_reference_front([f for _, _, f in entries])
        write_front(out / "reference" / f"{ident}.csv", reference)
        for method, rep, front in entries:
            rows.append({
                "instance": ident,
                "method": method,
                "rep": rep,
                "hv": hypervolume(front, ctx),
                "gd": generational_distance(front, reference, ctx),
            })
    rows.sort(key=lambda r: (r["instance"], r["method"], r["rep"]))
    return rows


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Report:
    methods: List[str]
    rows: List[dict]

    def to_csv(self, path) -> None:
        fields = ["row", "n", "g", "m"]
        fields += [f"hv_{m}" for m in self.methods] + [f"gd_{m}" for m in self.methods]
        fields += ["best_hv", "best_gd"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

    def to_text(self) -> str:
        head = ["", "n", "g", "m"] + [f"Ih:{m}" for m in self.methods] + [f"GD:{m}" for m in self.methods]
        head += ["best Ih", "best GD"]
        table = [head]
        for row in self.rows:
            line = [row["row"], str(row["n"]), str(row["g"]), str(row["m"])]
            line += [f"{row[f'hv_{m}']:.3f}" for m in self.methods]
            line += [f"{row[f'gd_{m}']:.3f}" for m in self.methods]
            line += [row["best_hv"], row["best_gd"]]
            table.append(line)
        widths = [max(len(r[c]) for r in table) for c in range(len(head))]
        return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in table) + "\n"


def _best(means: Dict[str, float], higher: bool) -> str:
    target = max(means.values()) if higher else min(means.values())
    return "|".join(m for m, v in means.items() if v == target)


def report(metrics: Sequence[dict], classes: Dict[str, Tuple[int, int, int]],
           methods: Optional[Sequence[str]] = None) -> Report:
    """Means per (n, g, m) with best-method markers, per-n and per-size averages, grand average."""
    if not metrics:
        raise ValueError("no results to report")
    methods = list(methods or sorted({r["method"] for r in metrics}))
    cell_values: Dict[Tuple[int, int, int], Dict[str, Dict[str, List[float]]]] = defaultdict(
        lambda: {"hv": defaultdict(list), "gd": defaultdict(list)}
    )
    for r in metrics:
        key = classes[r["instance"]]
        cell_values[key]["hv"][r["method"]].append(r["hv"])
        cell_values[key]["gd"][r["method"]].append(r["gd"])

    def make_row(label, n, g, m, values):
        hv = {meth: fmean(values["hv"][meth]) for meth in methods if values["hv"].get(meth)}
        gd = {meth: fmean(values["gd"][meth]) for meth in methods if values["gd"].get(meth)}
        row = {"row": label, "n": n, "g": g, "m": m}
        for meth in methods:
            row[f"hv_{meth}"] = hv.get(meth, float("nan"))
            row[f"gd_{meth}"] = gd.get(meth, float("nan"))
        row["best_hv"] = _best(hv, higher=True) if hv else ""
        row["best_gd"] = _best(gd, higher=False) if gd else ""
        return row

    def merged(keys):
        acc = {"hv": defaultdict(list), "gd": defaultdict(list)}
        for key in keys:
            for metric in ("hv", "gd"):
                for meth, vals in cell_values[key][metric].items():
                    acc[metric][meth].extend(vals)
        return acc

    rows = []
    keys = sorted(cell_values)
    for n in sorted({k[0] for k in keys}):
        mine = [k for k in keys if k[0] == n]
        for key in mine:
            rows.append(make_row("cell", *key, cell_values[key]))
        rows.append(make_row("avg_n", n, "", "", merged(mine)))
    for group in SIZE_GROUPS:
        mine = [k for k in keys if size_group(k[0]) == group]
        if mine:
            rows.append(make_row(f"avg_{group}", "", "", "", merged(mine)))
    rows.append(make_row("grand", "", "", "", merged(keys)))
    return Report(methods, rows)


def read_classes(path) -> Dict[str, Tuple[int, int, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {r["instance"]: (int(r["n"]), int(r["g"]), int(r["m"])) for r in csv.DictReader(fh)}


def group_means(metrics: Sequence[dict], classes: Dict[str, Tuple[int, int, int]],
                group: str, method: str, metric: str) -> float:
    vals = [r[metric] for r in metrics
            if r["method"] == method and size_group(classes[r["instance"]][0]) == group]
    if not vals:
        raise ValueError(f"no {metric} values for {method} in group {group}")
    return fmean(vals)


def write_plan(plan: ExperimentPlan, path) -> None:
    data = {
        "instances": [str(p) for p in plan.instances],
        "output_dir": str(plan.output_dir),
        "methods": plan.methods,
        "replications": plan.replications,
        "ms_per_unit": plan.ms_per_unit,
        "master_seed": plan.master_seed,
        "iter_cap": plan.iter_cap,
        "workers": plan.workers,
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
