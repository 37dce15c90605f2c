import csv
import math
import random
from pathlib import Path
from statistics import fmean

import pytest

from bhfs import bench
from bhfs.core import read_instance, write_instance
from bhfs.pareto import (
    NormalizationContext,
    generational_distance,
    hypervolume,
    read_front,
    read_metrics,
)

from oracles import gd_bruteforce, hv_rectangles, pairwise_filter


def small_specs(seed=7):
    return [bench.GeneratorSpec(n, 2, 2, bench.derive_seed(seed, n), f"s{n}") for n in (5, 6)]


def tiny_plan(tmp_path, specs, methods=("ripg",), reps=1, iter_cap=20):
    paths = bench.generate_benchmark(tmp_path / "inst", specs=specs)
    return bench.ExperimentPlan(instances=paths, output_dir=tmp_path / "out",
                                methods={m: {} for m in methods}, replications=reps,
                                ms_per_unit=10_000, iter_cap=iter_cap)


# -- generator -------------------------------------------------------------


def test_generation_is_byte_identical(tmp_path):
    a = bench.generate_benchmark(tmp_path / "a", master_seed=11)
    b = bench.generate_benchmark(tmp_path / "b", master_seed=11)
    assert len(a) == 54 + 27
    assert sum(p.parent.name == "test" for p in a) == 54
    for pa, pb in zip(a, b):
        assert pa.name == pb.name and pa.read_bytes() == pb.read_bytes()
    c = bench.generate_benchmark(tmp_path / "c", master_seed=12, calibration=False)
    assert len(c) == 54
    assert any(pa.read_bytes() != pc.read_bytes() for pa, pc in zip(a, c))


def test_generated_values_in_range(tmp_path):
    for path in bench.generate_benchmark(tmp_path, master_seed=3):
        inst = read_instance(path)
        assert inst.n in bench.JOB_CLASSES and inst.K in bench.STAGE_LEVELS
        assert len(set(inst.machines_per_stage)) == 1
        assert inst.machines_per_stage[0] in bench.MACHINE_LEVELS
        assert all(1 <= p <= 99 for row in inst.proc_time for p in row)
        assert all(1 <= e <= 3 for e in inst.energy_proc)
        assert all(5 <= e <= 7 for e in inst.energy_block)
        assert all(3 <= e <= 5 for e in inst.energy_idle)
        assert path.stem == inst.id


def test_benchmark_grid_is_complete():
    specs = bench.benchmark_specs()
    assert {(s.n, s.g, s.m) for s in specs} == {
        (n, g, m) for n in bench.JOB_CLASSES for g in bench.STAGE_LEVELS for m in bench.MACHINE_LEVELS
    }
    cal = bench.calibration_specs()
    assert len({(s.n, s.g) for s in cal}) == 27
    assert not {s.seed for s in specs} & {s.seed for s in cal}


def test_size_groups():
    assert [bench.size_group(n) for n in (6, 12, 15, 30, 50, 100)] == [
        "small", "small", "medium", "medium", "large", "large"]


def test_derive_seed_stable():
    assert bench.derive_seed(1, "x") == bench.derive_seed(1, "x")
    assert bench.derive_seed(1, "x") != bench.derive_seed(1, "y")
    assert 0 <= bench.derive_seed("a") < 2 ** 64


# -- experiment ------------------------------------------------------------


def test_single_run_plan(tmp_path):
    plan = tiny_plan(tmp_path, small_specs()[:1])
    res = bench.run_experiment(plan)
    assert [r["status"] for r in res.runs] == ["ok"]
    assert len(list((tmp_path / "out" / "fronts").rglob("*.csv"))) == 1
    assert len(res.metrics) == 1
    assert res.runs[0]["budget_ms"] == 5 * 2 * 10_000
    row = res.metrics[0]
    # a single front is its own reference
    assert row["gd"] == 0.0
    assert (tmp_path / "out" / "traces" / "s5" / "ripg_rep00.jsonl").exists()


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("exp")
    plan = tiny_plan(tmp, small_specs(), methods=bench.METHODS, reps=2, iter_cap=15)
    return plan, bench.run_experiment(plan)


def test_experiment_outputs(experiment):
    plan, res = experiment
    assert len(res.runs) == 2 * 3 * 2
    assert all(r["status"] == "ok" for r in res.runs)
    assert len(res.metrics) == 12
    assert res.classes == {"s5": (5, 2, 2), "s6": (6, 2, 2)}
    with open(plan.output_dir / "runs.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 12


def test_reference_is_pairwise_filter(experiment):
    plan, res = experiment
    out = plan.output_dir
    for ident in ("s5", "s6"):
        union = [p for f in sorted((out / "fronts" / ident).glob("*.csv")) for p in read_front(f)]
        assert read_front(out / "reference" / f"{ident}.csv") == sorted(pairwise_filter(union))


def test_offline_metrics_match_inline(experiment):
    plan, res = experiment
    out = plan.output_dir
    again = bench.compute_metrics(out, res.runs)
    assert again == res.metrics
    assert read_metrics(out / "metrics.csv") == res.metrics
    for row in res.metrics:
        fronts = [read_front(f) for f in sorted((out / "fronts" / row["instance"]).glob("*.csv"))]
        ctx = NormalizationContext.from_fronts(fronts)
        ref = read_front(out / "reference" / f"{row['instance']}.csv")
        mine = read_front(out / "fronts" / row["instance"] / f"{row['method']}_rep{row['rep']:02d}.csv")
        assert math.isclose(row["hv"], hv_rectangles([ctx.normalize(p) for p in mine]), abs_tol=1e-9)
        assert math.isclose(row["gd"], gd_bruteforce([ctx.normalize(p) for p in mine],
                                                     [ctx.normalize(p) for p in ref]), abs_tol=1e-12)


def test_experiment_deterministic_under_iteration_cap(experiment, tmp_path):
    plan, res = experiment
    plan2 = tiny_plan(tmp_path, small_specs(), methods=bench.METHODS, reps=2, iter_cap=15)
    plan2.workers = 2
    res2 = bench.run_experiment(plan2)
    assert res2.metrics == res.metrics
    for f in sorted((plan.output_dir / "fronts").rglob("*.csv")):
        rel = f.relative_to(plan.output_dir)
        assert (plan2.output_dir / rel).read_bytes() == f.read_bytes()


def test_failed_run_is_recorded(tmp_path):
    plan = tiny_plan(tmp_path, small_specs()[:1], methods=("ripg",))
    plan.methods = {"ripg": {"d": 0}}
    res = bench.run_experiment(plan)
    assert res.runs[0]["status"].startswith("failed")
    assert res.metrics == []


def test_extra_fronts_join_reference(tmp_path):
    plan = tiny_plan(tmp_path, small_specs()[:1])
    extra = tmp_path / "eps.csv"
    extra.write_text("cmax,tec\n1,1\n")
    plan.extra_fronts = {"s5": {"aug_eps": extra}}
    res = bench.run_experiment(plan)
    assert read_front(tmp_path / "out" / "reference" / "s5.csv") == [(1, 1)]
    ripg = next(r for r in res.metrics if r["method"] == "ripg")
    assert ripg["gd"] > 0
    assert any(r["method"] == "aug_eps" and r["gd"] == 0 for r in res.metrics)


def test_solve_rejects_unknown_method(tmp_path):
    inst = bench.generate_instance(small_specs()[0])
    with pytest.raises(ValueError):
        bench.solve(inst, "tabu", None, 0, 5)


# -- report ----------------------------------------------------------------


def fake_metrics(seed=0):
    rng = random.Random(seed)
    classes, rows = {}, []
    for n in (6, 15, 50):
        for g in (2, 3):
            ident = f"i{n}_{g}"
            classes[ident] = (n, g, 2)
            for method in ("a", "b"):
                for rep in range(3):
                    rows.append({"instance": ident, "method": method, "rep": rep,
                                 "hv": rng.random(), "gd": rng.random()})
    return rows, classes


def test_report_means_match_direct_computation():
    rows, classes = fake_metrics()
    rep = bench.report(rows, classes)
    assert rep.methods == ["a", "b"]
    cells = [r for r in rep.rows if r["row"] == "cell"]
    assert len(cells) == 6
    for cell in cells:
        for method in ("a", "b"):
            for metric in ("hv", "gd"):
                vals = [r[metric] for r in rows if r["method"] == method
                        and classes[r["instance"]] == (cell["n"], cell["g"], cell["m"])]
                assert abs(cell[f"{metric}_{method}"] - sum(vals) / len(vals)) <= 1e-12
    labels = [r["row"] for r in rep.rows]
    assert labels.count("avg_n") == 3
    assert labels[-4:] == ["avg_small", "avg_medium", "avg_large", "grand"]
    grand = rep.rows[-1]
    for method in ("a", "b"):
        vals = [r["hv"] for r in rows if r["method"] == method]
        assert abs(grand[f"hv_{method}"] - sum(vals) / len(vals)) <= 1e-12
        assert abs(bench.group_means(rows, classes, "medium", method, "hv")
                   - next(r for r in rep.rows if r["row"] == "avg_medium")[f"hv_{method}"]) <= 1e-12


def test_report_best_markers():
    rows = [{"instance": "x", "method": m, "rep": 0, "hv": hv, "gd": gd}
            for m, hv, gd in (("a", 0.9, 0.1), ("b", 0.8, 0.05), ("c", 0.9, 0.2))]
    rep = bench.report(rows, {"x": (6, 2, 2)})
    assert rep.rows[0]["best_hv"] == "a|c"
    assert rep.rows[0]["best_gd"] == "b"
    single = bench.report(rows[:1], {"x": (6, 2, 2)})
    assert single.rows[0]["best_hv"] == "a" and single.rows[0]["best_gd"] == "a"


def test_report_injected_winner():
    rows, classes = fake_metrics(1)
    for r in rows:
        if r["method"] == "b":
            r["hv"], r["gd"] = 2.0, -1.0
    rep = bench.report(rows, classes)
    assert all(r["best_hv"] == "b" and r["best_gd"] == "b" for r in rep.rows)


def test_report_missing_method_column():
    rows, classes = fake_metrics()
    rep = bench.report(rows, classes, ["a", "b", "z"])
    assert all(math.isnan(r["hv_z"]) for r in rep.rows)
    assert "z" not in rep.rows[0]["best_hv"]


def test_report_empty_raises():
    with pytest.raises(ValueError):
        bench.report([], {})
    with pytest.raises(ValueError):
        bench.group_means([], {}, "small", "a", "hv")


def test_report_files_deterministic(tmp_path):
    rows, classes = fake_metrics()
    bench.report(rows, classes).to_csv(tmp_path / "a.csv")
    bench.report(list(reversed(rows)), classes).to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    text = bench.report(rows, classes).to_text()
    assert text.splitlines()[0].split()[:3] == ["n", "g", "m"]
    assert len(text.splitlines()) == 1 + len(bench.report(rows, classes).rows)


def test_read_classes_round_trip(experiment):
    plan, res = experiment
    assert bench.read_classes(plan.output_dir / "instances.csv") == res.classes


def test_metric_helpers_against_oracles():
    rng = random.Random(5)
    for _ in range(20):
        fronts = [[(rng.randint(0, 50), rng.randint(0, 50)) for _ in range(rng.randint(1, 6))]
                  for _ in range(3)]
        ctx = NormalizationContext.from_fronts(fronts)
        ref = pairwise_filter([p for f in fronts for p in f])
        for f in fronts:
            norm = [ctx.normalize(p) for p in f]
            assert math.isclose(hypervolume(f, ctx), hv_rectangles(norm), abs_tol=1e-9)
            assert math.isclose(generational_distance(f, ref, ctx),
                                gd_bruteforce(norm, [ctx.normalize(p) for p in ref]), abs_tol=1e-12)
