"""Augmented epsilon-constraint driver over an external MILP solver.

The solver is any command that reads an LP file and writes a solution file in
the ``<variable> <value>`` layout.  ``{lp}``, ``{sol}`` and ``{timeout_s}`` in
the command are substituted; without placeholders the LP and solution paths
are appended.  With no command the driver only writes the LP files.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from ..core import Instance, ObjectiveVector, evaluate, lower_bounds
from ..pareto import nondominated_points
from .lpfile import emit_lp, read_solution
from .milp import (
    OBJECTIVE_VAR,
    MilpModel,
    augmented,
    bound_objective,
    build_milp,
    solution_schedule,
    violated_rows,
)

log = logging.getLogger(__name__)


@dataclass
class EpsilonGrid:
    """Uniform split of ``[lower, upper]`` of the constrained objective.

    :meth:`cell_of` treats cells as half-open ``[lo, hi)`` except the last;
    the cell models themselves use closed bounds.
    """

    lower: float
    upper: float
    cells: int = 20

    def __post_init__(self) -> None:
        if self.cells < 1:
            raise ValueError("grid needs at least one cell")
        if self.upper < self.lower:
            raise ValueError(f"grid upper bound {self.upper} below lower bound {self.lower}")

    @property
    def width(self) -> float:
        return (self.upper - self.lower) / self.cells

    def bounds(self) -> List[Tuple[float, float]]:
        edges = [self.lower + c * self.width for c in range(self.cells)] + [self.upper]
        return [(_clean(a), _clean(b)) for a, b in zip(edges, edges[1:])]

    def cell_of(self, value: float) -> Optional[int]:
        if value < self.lower or value > self.upper:
            return None
        if self.width == 0:
            return 0
        return min(int((value - self.lower) / self.width), self.cells - 1)


def _clean(x: float):
    r = round(x)
    return int(r) if abs(x - r) < 1e-9 else x


@dataclass
class CellResult:
    name: str
    lp_path: Path
    status: str
    point: Optional[ObjectiveVector] = None
    bounds: Optional[Tuple[float, float]] = None


@dataclass
class EpsilonResult:
    front: List[ObjectiveVector]
    grid: Optional[EpsilonGrid]
    cells: List[CellResult] = field(default_factory=list)
    payoff: List[CellResult] = field(default_factory=list)

    @property
    def lp_files(self) -> List[Path]:
        return [c.lp_path for c in self.payoff + self.cells]


class _Solver:
    def __init__(self, cmd: Optional[str], timeout_ms: int):
        self.cmd = cmd
        self.timeout_ms = timeout_ms

    def __call__(self, instance: Instance, model: MilpModel, lp_path: Path):
        """Solve ``model``; returns ``(status, point, values)``."""
        if self.cmd is None:
            return "not_solved", None, None
        sol_path = lp_path.with_suffix(".sol")
        if sol_path.exists():
            sol_path.unlink()
        timeout_s = self.timeout_ms / 1000.0
        subst = {"lp": str(lp_path), "sol": str(sol_path), "timeout_s": f"{timeout_s:g}"}
        if any("{" + key + "}" in self.cmd for key in subst):
            argv = [part.format(**subst) for part in shlex.split(self.cmd)]
        else:
            argv = shlex.split(self.cmd) + [str(lp_path), str(sol_path)]
        try:
            subprocess.run(argv, timeout=timeout_s + 5.0, check=False,
                           stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
        except subprocess.TimeoutExpired:
            return "timeout", None, None
        except OSError as exc:
            log.warning("solver command failed to start: %s", exc)
            return "solver_error", None, None
        if not sol_path.exists():
            return "solver_error", None, None
        status, values = read_solution(sol_path)
        if status != "optimal":
            return status, None, None
        if violated_rows(model, values, tol=1e-5):
            return "infeasible_solution", None, values
        sched = solution_schedule(instance, values)
        if sched is not None:
            point = evaluate(instance, sched).vector
        else:
            point = ObjectiveVector(_clean(values["Cmax"]), _clean(values["TEC"]))
        return "optimal", point, values


def epsilon_driver(
    instance: Instance,
    grid_cells: int = 20,
    solver_cmd: Optional[str] = None,
    per_cell_timeout_ms: int = 180_000,
    workdir=None,
    primary: str = "cmax",
    payoff_timeout_ms: Optional[int] = None,
) -> EpsilonResult:
    """Payoff table by lexicographic solves, then one augmented solve per grid cell.

    ``primary`` is the optimised objective; the other one is gridded
    (by default makespan is minimised over an energy grid).
    """
    if primary not in OBJECTIVE_VAR:
        raise ValueError(f"primary must be 'cmax' or 'tec', got {primary!r}")
    constrained = "tec" if primary == "cmax" else "cmax"
    workdir = Path(workdir or f"epsilon_{instance.id}")
    workdir.mkdir(parents=True, exist_ok=True)
    solver = _Solver(solver_cmd, per_cell_timeout_ms)
    payoff_solver = _Solver(solver_cmd, payoff_timeout_ms or per_cell_timeout_ms)
    base = {obj: build_milp(instance, obj) for obj in ("cmax", "tec")}
    result = EpsilonResult(front=[], grid=None)

    extremes = {}
    for obj in ("cmax", "tec"):
        other = "tec" if obj == "cmax" else "cmax"
        path = emit_lp(base[obj], workdir / f"payoff_{obj}.lp")
        status, point, _ = payoff_solver(instance, base[obj], path)
        result.payoff.append(CellResult(f"payoff_{obj}", path, status, point))
        if point is None:
            continue
        best = point.cmax if obj == "cmax" else point.tec
        lex = bound_objective(base[other], obj, upper=best)
        path = emit_lp(lex, workdir / f"payoff_{obj}_lex.lp")
        status, lex_point, _ = payoff_solver(instance, lex, path)
        result.payoff.append(CellResult(f"payoff_{obj}_lex", path, status, lex_point))
        extremes[obj] = lex_point or point

    idx = 1 if constrained == "tec" else 0
    if len(extremes) == 2:
        lo = extremes[constrained][idx]
        hi = extremes[primary][idx]
    else:
        if solver_cmd is not None:
            log.warning("payoff solves failed; gridding heuristic bounds")
        lo, hi = _heuristic_range(instance, constrained)
    grid = EpsilonGrid(lo, max(lo, hi), grid_cells)
    result.grid = grid
    span = grid.upper - grid.lower
    delta = 1e-3 / span if span > 0 else 1e-3

    for c, (a, b) in enumerate(grid.bounds()):
        model = augmented(base[primary], primary, constrained, a, b, delta)
        path = emit_lp(model, workdir / f"cell_{c:02d}.lp")
        status, point, _ = solver(instance, model, path)
        result.cells.append(CellResult(f"cell_{c:02d}", path, status, point, (a, b)))

    points = [r.point for r in result.payoff + result.cells if r.point is not None]
    result.front = nondominated_points(points)
    return result


def _heuristic_range(instance: Instance, constrained: str) -> Tuple[int, int]:
    from ..ripg import initialize

    archive = initialize(instance)
    cmax_lb, tec_lb = lower_bounds(instance)
    pts = archive.points()
    if constrained == "tec":
        return tec_lb, max(p.tec for p in pts)
    return cmax_lb, max(p.cmax for p in pts)

