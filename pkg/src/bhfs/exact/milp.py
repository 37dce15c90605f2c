"""Symbolic MILP for the bi-objective blocking hybrid flow shop.

Rows are tagged with the family they belong to (``eq01`` ... ``eq24``) and
named ``<tag>_<indices>``.  Start times ``S`` are general integers (all data
are integer, so every other time follows suit); the rest of the timing
variables are continuous and non-negative.  ``X``
(assignment), ``Q`` (first job on a machine) and ``Z`` (precedence on a
stage) are binary.  The blocking definition row family ``eq10`` is not
emitted: completion = start + processing + blocking together with
stage linking already pins the blocking time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..core import Instance, Schedule, evaluate, machine_stats

OBJECTIVES = ("tec", "cmax")


@dataclass
class Variable:
    name: str
    binary: bool = False
    integer: bool = False


@dataclass
class Constraint:
    name: str
    terms: List[Tuple[object, str]]
    sense: str  # "<=", ">=" or "="
    rhs: object

    @property
    def tag(self) -> str:
        return self.name.split("_", 1)[0]


@dataclass
class MilpModel:
    variables: Dict[str, Variable] = field(default_factory=dict)
    constraints: List[Constraint] = field(default_factory=list)
    objective: List[Tuple[object, str]] = field(default_factory=list)
    objective_mode: str = "tec"
    big_M: int = 0
    title: str = ""

    def add_var(self, name: str, binary: bool = False, integer: bool = False) -> str:
        self.variables[name] = Variable(name, binary, integer)
        return name

    def add(self, name: str, terms, sense: str, rhs) -> None:
        terms = [(c, v) for c, v in terms if c != 0]
        for _, v in terms:
            if v not in self.variables:
                raise KeyError(f"row {name} references undeclared variable {v}")
        self.constraints.append(Constraint(name, terms, sense, rhs))

    def counts(self) -> Dict[str, int]:
        binaries = sum(1 for v in self.variables.values() if v.binary)
        integers = sum(1 for v in self.variables.values() if v.integer)
        return {
            "variables": len(self.variables),
            "binary": binaries,
            "integer": integers,
            "continuous": len(self.variables) - binaries - integers,
            "constraints": len(self.constraints),
        }

    def rows_by_tag(self) -> Dict[str, int]:
        tally: Dict[str, int] = {}
        for row in self.constraints:
            tally[row.tag] = tally.get(row.tag, 0) + 1
        return tally


def _v(kind: str, *idx: int) -> str:
    return "_".join([kind, *map(str, idx)])


def build_milp(instance: Instance, objective_mode: str = "tec") -> MilpModel:
    if objective_mode not in OBJECTIVES:
        raise ValueError(f"objective_mode must be one of {OBJECTIVES}, got {objective_mode!r}")
    n, K = instance.n, instance.K
    Ms = instance.machines_per_stage
    P = instance.proc_time
    big = 1 + sum(sum(row) for row in P)
    model = MilpModel(objective_mode=objective_mode, big_M=big, title=instance.id)
    machines = [(k, m) for k in range(K) for m in range(Ms[k])]

    for i in range(n):
        for k in range(K):
            model.add_var(_v("S", i, k), integer=True)
            model.add_var(_v("C", i, k))
            model.add_var(_v("BT", i, k))
    for i in range(n):
        for k, m in machines:
            model.add_var(_v("BTm", i, k, m))
    for k, m in machines:
        model.add_var(_v("Idle", k, m))
        model.add_var(_v("LC", k, m))
        model.add_var(_v("ES", k, m))
    for name in ("Cmax", "TEC", "TBT", "Tidle"):
        model.add_var(name)
    for i in range(n):
        for k, m in machines:
            model.add_var(_v("X", i, k, m), binary=True)
    for i in range(n):
        for k, m in machines:
            model.add_var(_v("Q", i, k, m), binary=True)
    for k in range(K):
        for i in range(n):
            for j in range(n):
                if i != j:
                    model.add_var(_v("Z", i, j, k), binary=True)

    X = lambda i, k, m: _v("X", i, k, m)  # noqa: E731
    Q = lambda i, k, m: _v("Q", i, k, m)  # noqa: E731

    for i in range(n):
        for k in range(K):
            model.add(_v("eq01", i, k), [(1, X(i, k, m)) for m in range(Ms[k])], "=", 1)
    for k in range(K):
        for i in range(n):
            for j in range(i + 1, n):
                model.add(_v("eq02", i, j, k), [(1, _v("Z", i, j, k)), (1, _v("Z", j, i, k))], "<=", 1)
    for k, m in machines:
        for i in range(n):
            for j in range(i + 1, n):
                model.add(
                    _v("eq03", i, j, k, m),
                    [(1, _v("Z", i, j, k)), (1, _v("Z", j, i, k)), (-1, X(i, k, m)), (-1, X(j, k, m))],
                    ">=", -1,
                )
    for k, m in machines:
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                model.add(
                    _v("eq04", i, j, k, m),
                    [(1, _v("S", j, k)), (-1, _v("C", i, k)), (-big, X(i, k, m)),
                     (-big, X(j, k, m)), (-big, _v("Z", i, j, k))],
                    ">=", -3 * big,
                )
    for i in range(n):
        for k in range(K):
            model.add(_v("eq06", i, k), [(1, _v("C", i, k)), (-1, _v("S", i, k)), (-1, _v("BT", i, k))], "=", P[i][k])
    for i in range(n):
        model.add(_v("eq07", i), [(1, _v("BT", i, K - 1))], "=", 0)
    for i in range(n):
        for k in range(K - 1):
            model.add(_v("eq08", i, k), [(1, _v("C", i, k)), (-1, _v("S", i, k + 1))], "=", 0)
    for i in range(n):
        model.add(_v("eq09", i), [(1, "Cmax"), (-1, _v("C", i, K - 1))], ">=", 0)
    model.add(
        "eq11",
        [(1, "TBT")] + [(-1, _v("BT", i, k)) for i in range(n) for k in range(K - 1)],
        "=", 0,
    )
    for k, m in machines:
        for i in range(n):
            model.add(_v("eq12", i, k, m), [(1, _v("C", i, k)), (-1, _v("LC", k, m)), (big, X(i, k, m))], "<=", big)
            model.add(_v("eq13", i, k, m), [(1, _v("S", i, k)), (-1, _v("ES", k, m)), (-big, Q(i, k, m))], ">=", -big)
            model.add(_v("eq14", i, k, m), [(1, _v("S", i, k)), (-1, _v("ES", k, m)), (big, Q(i, k, m))], "<=", big)
            model.add(_v("eq15", i, k, m), [(1, _v("S", i, k)), (-1, _v("ES", k, m)), (-big, X(i, k, m))], ">=", -big)
            model.add(_v("eq16", i, k, m), [(1, Q(i, k, m)), (-1, X(i, k, m))], "<=", 0)
    for k, m in machines:
        model.add(_v("eq17", k, m), [(1, Q(i, k, m)) for i in range(n)], "<=", 1)
        model.add(
            _v("eq18", k, m),
            [(1, X(i, k, m)) for i in range(n)] + [(-big, Q(i, k, m)) for i in range(n)],
            "<=", 0,
        )
    for k, m in machines:
        for i in range(n):
            btm, bt = _v("BTm", i, k, m), _v("BT", i, k)
            model.add(_v("eq19", i, k, m), [(1, btm), (-1, bt), (-big, X(i, k, m))], ">=", -big)
            model.add(_v("eq20", i, k, m), [(1, btm), (-1, bt), (big, X(i, k, m))], "<=", big)
            model.add(_v("eq21", i, k, m), [(1, btm), (-big, X(i, k, m))], "<=", 0)
    for k, m in machines:
        terms = [(1, _v("Idle", k, m)), (-1, _v("LC", k, m)), (1, _v("ES", k, m))]
        terms += [(P[i][k], X(i, k, m)) for i in range(n)]
        terms += [(1, _v("BTm", i, k, m)) for i in range(n)]
        model.add(_v("eq22", k, m), terms, "=", 0)
    model.add("eq23", [(1, "Tidle")] + [(-1, _v("Idle", k, m)) for k, m in machines], "=", 0)
    terms = [(1, "TEC")]
    terms += [(-instance.energy_block[k], _v("BT", i, k)) for i in range(n) for k in range(K)]
    terms += [(-instance.energy_idle[k], _v("Idle", k, m)) for k, m in machines]
    model.add("eq24", terms, "=", instance.processing_energy)

    model.objective = [(1, "TEC" if objective_mode == "tec" else "Cmax")]
    return model


OBJECTIVE_VAR = {"tec": "TEC", "cmax": "Cmax"}


def bound_objective(model: MilpModel, objective: str, upper=None, lower=None) -> MilpModel:
    """Copy of ``model`` with ``lower <= objective <= upper`` rows added."""
    out = _copy(model)
    var = OBJECTIVE_VAR[objective]
    if lower is not None:
        out.add("eq28_lo", [(1, var)], ">=", lower)
    if upper is not None:
        out.add("eq28_hi", [(1, var)], "<=", upper)
    return out


def augmented(model: MilpModel, primary: str, constrained: str, lower, upper, delta: float) -> MilpModel:
    """Cell model: minimise ``primary - delta * slack`` with ``constrained + slack = upper``."""
    out = _copy(model)
    var = OBJECTIVE_VAR[constrained]
    out.add_var("slack")
    out.add("eq28_lo", [(1, var)], ">=", lower)
    out.add("eq28_hi", [(1, var), (1, "slack")], "=", upper)
    out.objective = [(1, OBJECTIVE_VAR[primary]), (-delta, "slack")]
    out.objective_mode = f"augmented_{primary}"
    return out


def _copy(model: MilpModel) -> MilpModel:
    return MilpModel(
        variables=dict(model.variables),
        constraints=list(model.constraints),
        objective=list(model.objective),
        objective_mode=model.objective_mode,
        big_M=model.big_M,
        title=model.title,
    )


def expected_counts(n: int, K: int, machines_per_stage: Sequence[int]) -> Dict[str, int]:
    """Closed-form variable and row tallies of :func:`build_milp`."""
    Msum = sum(machines_per_stage)
    pairs = n * (n - 1) // 2
    rows = {
        "eq01": n * K,
        "eq02": pairs * K,
        "eq03": pairs * Msum,
        "eq04": n * (n - 1) * Msum,
        "eq06": n * K,
        "eq07": n,
        "eq08": n * (K - 1),
        "eq09": n,
        "eq11": 1,
        "eq12": n * Msum,
        "eq13": n * Msum,
        "eq14": n * Msum,
        "eq15": n * Msum,
        "eq16": n * Msum,
        "eq17": Msum,
        "eq18": Msum,
        "eq19": n * Msum,
        "eq20": n * Msum,
        "eq21": n * Msum,
        "eq22": Msum,
        "eq23": 1,
        "eq24": 1,
    }
    binary = 2 * n * Msum + n * (n - 1) * K
    integer = n * K
    continuous = 2 * n * K + n * Msum + 3 * Msum + 4
    return {
        "variables": binary + integer + continuous,
        "binary": binary,
        "integer": integer,
        "continuous": continuous,
        "constraints": sum(rows.values()),
        "rows": rows,
    }


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


def schedule_values(instance: Instance, sched: Schedule) -> Dict[str, int]:
    """Assign every model variable from a concrete schedule (unused machines get zeros)."""
    report = evaluate(instance, sched)
    n, K = instance.n, instance.K
    values: Dict[str, int] = {}
    for i in range(n):
        for k in range(K):
            values[_v("S", i, k)] = sched.start[i][k]
            values[_v("C", i, k)] = sched.completion[i][k]
            values[_v("BT", i, k)] = sched.block[i][k]
    stats = machine_stats(instance, sched)
    for (k, m), st in stats.items():
        values[_v("Idle", k, m)] = st.idle
        values[_v("LC", k, m)] = st.latest_completion if st.used else 0
        values[_v("ES", k, m)] = st.earliest_start if st.used else 0
        timeline = sched.machine_timelines[(k, m)]
        on_machine = [i for i, _, _ in timeline]
        for i in range(n):
            assigned = sched.assignment[i][k] == m
            values[_v("X", i, k, m)] = int(assigned)
            values[_v("BTm", i, k, m)] = sched.block[i][k] if assigned else 0
            values[_v("Q", i, k, m)] = int(bool(on_machine) and on_machine[0] == i)
        for a, i in enumerate(on_machine):
            for j in on_machine[a + 1:]:
                values[_v("Z", i, j, k)] = 1
    for k in range(K):
        for i in range(n):
            for j in range(n):
                if i != j:
                    values.setdefault(_v("Z", i, j, k), 0)
    values["Cmax"] = report.cmax
    values["TEC"] = report.tec
    values["TBT"] = report.tbt
    values["Tidle"] = report.tidle
    return values


def violated_rows(model: MilpModel, values: Dict[str, float], tol: float = 0) -> List[str]:
    """Names of rows not satisfied by ``values`` (exact when values and ``tol`` are integers)."""
    bad = []
    for row in model.constraints:
        lhs = sum(c * values[v] for c, v in row.terms)
        if row.sense == "=":
            ok = abs(lhs - row.rhs) <= tol
        elif row.sense == "<=":
            ok = lhs <= row.rhs + tol
        else:
            ok = lhs >= row.rhs - tol
        if not ok:
            bad.append(row.name)
    for name, var in model.variables.items():
        val = values.get(name, 0)
        if val < -tol or (var.binary and min(abs(val), abs(val - 1)) > tol):
            bad.append(f"domain_{name}")
        elif var.integer and abs(val - round(val)) > tol:
            bad.append(f"domain_{name}")
    return bad


def objective_value(model: MilpModel, values: Dict[str, float]) -> float:
    return sum(c * values.get(v, 0) for c, v in model.objective)


def solution_schedule(instance: Instance, values: Dict[str, float], tol: float = 1e-6) -> Optional[Schedule]:
    """Rebuild an integer schedule from solver values; ``None`` if times are not integral."""
    n, K = instance.n, instance.K
    S = [[0] * K for _ in range(n)]
    C = [[0] * K for _ in range(n)]
    X = [[0] * K for _ in range(n)]
    for i in range(n):
        for k in range(K):
            for name, target in ((_v("S", i, k), S), (_v("C", i, k), C)):
                v = values.get(name, 0.0)
                if abs(v - round(v)) > tol:
                    return None
                target[i][k] = int(round(v))
            X[i][k] = max(
                range(instance.machines_per_stage[k]),
                key=lambda m: values.get(_v("X", i, k, m), 0.0),
            )
    return Schedule.from_rows(instance, S, C, X)
