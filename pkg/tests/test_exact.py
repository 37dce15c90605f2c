import math
import random
import sys
from pathlib import Path

import pytest

from bhfs.core import Instance, decode, evaluate_perm, table1_instance
from bhfs.exact.epsilon import EpsilonGrid, epsilon_driver
from bhfs.exact.lpfile import emit_lp, format_lp, parse_lp, read_lp, read_solution, write_solution
from bhfs.exact.milp import (
    augmented,
    bound_objective,
    build_milp,
    expected_counts,
    schedule_values,
    solution_schedule,
    violated_rows,
)
from bhfs.exact.oracle import OracleCapError, _stage_layouts, count_full_combinations, exhaustive_front
from bhfs.pareto import weakly_dominates

from conftest import random_instance, random_perm

FIXTURES = Path(__file__).parent / "fixtures"

try:
    import highspy  # noqa: F401

    HAVE_HIGHS = True
except ImportError:
    HAVE_HIGHS = False

SOLVER = f"{sys.executable} -m bhfs.exact.highs_solver {{lp}} {{sol}} --time-limit {{timeout_s}}"
needs_solver = pytest.mark.skipif(not HAVE_HIGHS, reason="no MILP solver available")


def tiny(seed, n=3, M=(2, 1)):
    rng = random.Random(seed)
    return Instance([[rng.randint(1, 9) for _ in range(2)] for _ in range(n)], list(M),
                    [rng.randint(1, 3) for _ in range(2)], [rng.randint(3, 5) for _ in range(2)],
                    [rng.randint(5, 7) for _ in range(2)], id=f"tiny{seed}")


# -- model -----------------------------------------------------------------


def test_binary_count_example():
    inst = Instance([[1, 2], [3, 4], [5, 6]], [2, 2], [1, 1], [1, 1], [1, 1])
    assert build_milp(inst).counts()["binary"] == 36


@pytest.mark.parametrize("seed", range(10))
def test_counts_match_closed_form(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, n_max=6, stages=(2, 3, 4))
    model = build_milp(inst)
    want = expected_counts(inst.n, inst.K, inst.machines_per_stage)
    got = model.counts()
    for key in ("variables", "binary", "integer", "constraints"):
        assert got[key] == want[key]
    assert model.rows_by_tag() == {k: v for k, v in want["rows"].items() if v}
    assert "eq10" not in model.rows_by_tag()


def test_model_rejects_unknown_variable():
    model = build_milp(tiny(0))
    with pytest.raises(KeyError):
        model.add("eq99", [(1, "nope")], "<=", 0)
    with pytest.raises(ValueError):
        build_milp(tiny(0), "energy")


def test_big_m():
    inst = tiny(1)
    assert build_milp(inst).big_M == 1 + sum(map(sum, inst.proc_time))


@pytest.mark.parametrize("seed", range(50))
def test_decoded_schedules_satisfy_every_row(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, n_max=5, stages=(2, 3))
    sched = decode(inst, random_perm(rng, inst.n))
    values = schedule_values(inst, sched)
    for mode in ("tec", "cmax"):
        assert violated_rows(build_milp(inst, mode), values) == []


def test_certificate_detects_tampering():
    inst = tiny(2)
    values = schedule_values(inst, decode(inst, (0, 1, 2)))
    values["TEC"] -= 1
    assert violated_rows(build_milp(inst), values) == ["eq24"]
    values = schedule_values(inst, decode(inst, (0, 1, 2)))
    values["S_0_0"] = 0.5
    assert "domain_S_0_0" in violated_rows(build_milp(inst), values, tol=1e-9)


def test_solution_schedule_round_trip():
    inst = tiny(3)
    sched = decode(inst, (2, 0, 1))
    rebuilt = solution_schedule(inst, schedule_values(inst, sched))
    assert rebuilt.start == sched.start and rebuilt.completion == sched.completion
    assert solution_schedule(inst, {"S_0_0": 0.5}) is None


def test_bounded_and_augmented_models():
    base = build_milp(tiny(4), "cmax")
    lex = bound_objective(base, "tec", upper=50, lower=10)
    assert [r.name for r in lex.constraints[-2:]] == ["eq28_lo", "eq28_hi"]
    assert len(base.constraints) + 2 == len(lex.constraints)
    aug = augmented(base, "cmax", "tec", 10, 20, 0.001)
    assert "slack" in aug.variables and "slack" not in base.variables
    assert aug.objective == [(1, "Cmax"), (-0.001, "slack")]


# -- LP files --------------------------------------------------------------


def test_golden_two_job_file():
    inst = Instance([[2, 5], [2, 2]], [2, 1], [1, 1], [1, 1], [1, 1], id="two_job")
    assert format_lp(build_milp(inst, "tec")) == (FIXTURES / "two_job_tec.lp").read_text()


def test_emission_deterministic_and_round_trips(tmp_path):
    model = build_milp(table1_instance(), "cmax")
    a = emit_lp(model, tmp_path / "a.lp").read_bytes()
    b = emit_lp(build_milp(table1_instance(), "cmax"), tmp_path / "b.lp").read_bytes()
    assert a == b
    assert read_lp(tmp_path / "a.lp") == model
    aug = augmented(model, "cmax", "tec", 180.5, 190.25, 1e-3 / 9.75)
    assert parse_lp(format_lp(aug)) == aug
    assert max(len(line) for line in format_lp(model).splitlines()) <= 200


def test_emit_to_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_lp(build_milp(tiny(0)), tmp_path / "missing" / "x.lp")


def test_read_solution_layouts(tmp_path):
    path = tmp_path / "s.sol"
    path.write_text("Model status: Optimal\n\nCmax 12\nTEC 99.0\n# status optimal\nnot a number\n")
    assert read_solution(path) == ("optimal", {"Cmax": 12.0, "TEC": 99.0})
    write_solution(path, "infeasible", {})
    assert read_solution(path) == ("infeasible", {})
    path.write_text("x 1\n")
    assert read_solution(path) == ("optimal", {"x": 1.0})


# -- oracle ----------------------------------------------------------------


def lah_total(n, m):
    return sum(math.comb(n - 1, k - 1) * math.factorial(n) // math.factorial(k) for k in range(1, min(n, m) + 1))


@pytest.mark.parametrize("n, m", [(1, 1), (2, 2), (3, 2), (4, 2), (4, 3), (5, 2)])
def test_stage_layout_count_is_lah_sum(n, m):
    assert len(_stage_layouts(n, m)) == lah_total(n, m)


def test_oracle_trivial_instances():
    one = Instance([[3, 4]], [2, 1], [2, 1], [1, 1], [1, 1])
    assert exhaustive_front(one) == [(7, 10)]
    assert exhaustive_front(one, "full") == [(7, 10)]
    two = Instance([[2, 5], [2, 2]], [1, 1], [1, 1], [1, 1], [1, 1], require_hybrid=False)
    front, wit = exhaustive_front(two, with_witness=True)
    assert (9, 14) in front or any(weakly_dominates(p, (9, 14)) for p in front)
    assert {evaluate_perm(two, (0, 1)), evaluate_perm(two, (1, 0))} >= set(front)
    assert all(evaluate_perm(two, wit[p]) == p for p in front)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("timing", ["earliest", "optimal"])
def test_full_mode_dominates_permutation_mode(seed, timing):
    inst = tiny(seed, M=(2, 2) if seed % 2 else (1, 2))
    perm_front = exhaustive_front(inst)
    full_front = exhaustive_front(inst, "full", timing=timing)
    for p in perm_front:
        assert any(weakly_dominates(q, p) for q in full_front)


def test_oracle_caps():
    with pytest.raises(OracleCapError):
        exhaustive_front(table1_instance(), cap=100)
    with pytest.raises(OracleCapError):
        exhaustive_front(tiny(0, n=6, M=(2, 2)), "full")
    with pytest.raises(OracleCapError):
        exhaustive_front(tiny(0, n=4, M=(2, 2)), "full", cap=100)
    assert count_full_combinations(tiny(0, n=3, M=(2, 2))) == 144
    with pytest.raises(ValueError):
        exhaustive_front(tiny(0), "sideways")


# -- epsilon driver --------------------------------------------------------


def test_grid_partition():
    grid = EpsilonGrid(10, 30, 20)
    cells = grid.bounds()
    assert cells[0][0] == 10 and cells[-1][1] == 30
    assert all(a <= b for a, b in cells)
    assert all(x[1] == y[0] for x, y in zip(cells, cells[1:]))
    assert grid.cell_of(10) == 0 and grid.cell_of(11) == 1 and grid.cell_of(30) == 19
    assert grid.cell_of(31) is None
    assert EpsilonGrid(5, 5, 4).cell_of(5) == 0
    with pytest.raises(ValueError):
        EpsilonGrid(5, 4)
    with pytest.raises(ValueError):
        EpsilonGrid(0, 1, 0)


def test_driver_without_solver_only_writes_files(tmp_path):
    res = epsilon_driver(tiny(5), grid_cells=20, workdir=tmp_path)
    assert len(res.lp_files) == 22
    assert len(list(tmp_path.glob("*.lp"))) == 22
    assert res.front == []
    assert all(c.status == "not_solved" for c in res.cells + res.payoff)


def test_driver_survives_failing_solver(tmp_path):
    script = tmp_path / "fail.py"
    script.write_text("import sys\nopen(sys.argv[2], 'w').write('# status infeasible\\n')\n")
    res = epsilon_driver(tiny(5), grid_cells=3, solver_cmd=f"{sys.executable} {script}", workdir=tmp_path / "w")
    assert res.front == []
    assert {c.status for c in res.payoff + res.cells} == {"infeasible"}
    res = epsilon_driver(tiny(5), grid_cells=2, solver_cmd="/nonexistent/solver", workdir=tmp_path / "x")
    assert {c.status for c in res.payoff + res.cells} == {"solver_error"}
    slow = tmp_path / "slow.py"
    slow.write_text("import time\ntime.sleep(30)\n")
    res = epsilon_driver(tiny(5), grid_cells=1, solver_cmd=f"{sys.executable} {slow}",
                         per_cell_timeout_ms=10, workdir=tmp_path / "y")
    assert {c.status for c in res.payoff + res.cells} == {"timeout"}


@needs_solver
def test_single_job_milp_makespan(tmp_path):
    inst = Instance([[3, 4]], [2, 1], [2, 1], [1, 1], [1, 1])
    res = epsilon_driver(inst, grid_cells=2, solver_cmd=SOLVER, workdir=tmp_path)
    assert res.front == [(7, 10)]


@needs_solver
@pytest.mark.parametrize("primary", ["cmax", "tec"])
@pytest.mark.parametrize("seed", [1, 15, 20])
def test_driver_front_equals_full_oracle(tmp_path, seed, primary):
    inst = tiny(seed, M=(2, 1))
    res = epsilon_driver(inst, grid_cells=20, solver_cmd=SOLVER, per_cell_timeout_ms=60_000,
                         workdir=tmp_path, primary=primary)
    assert res.front == exhaustive_front(inst, "full", timing="optimal")
