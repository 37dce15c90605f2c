"""Brute-force ground truth for tiny instances.

``permutation`` mode decodes every job order.  ``full`` mode enumerates
machine assignments together with per-machine job orders, so it also covers
schedules that no entry order produces.  For each such combination the
earliest timing is found as a longest path over the precedence graph (a
cycle means the orders deadlock under blocking and the combination is
dropped).  With ``timing="optimal"`` jobs may also be held back: for each
integer makespan bound the least-energy timing is found by a small LP, which
matches the freedom an integer-timed MILP solver has.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple

from ..core import Instance, ObjectiveVector, evaluate_perm
from ..pareto import nondominated_points

MachineOrders = Tuple[Tuple[int, ...], ...]


class OracleCapError(RuntimeError):
    """Raised when the enumeration would exceed the configured cap."""


def _stage_layouts(n: int, machines: int) -> List[MachineOrders]:
    """Ordered job lists per machine, up to relabelling of identical machines.

    Canonical form: non-empty machines come first, sorted by their smallest job.
    """
    layouts = []
    for labels in itertools.product(range(machines), repeat=n):
        groups: Dict[int, List[int]] = {}
        for job, lab in enumerate(labels):
            groups.setdefault(lab, []).append(job)
        blocks = sorted(groups.values(), key=min)
        # labels are canonical when block b carries label b in first-job order
        if any(labels[block[0]] != b for b, block in enumerate(blocks)):
            continue
        for orders in itertools.product(*(itertools.permutations(b) for b in blocks)):
            layouts.append(tuple(orders) + ((),) * (machines - len(blocks)))
    return layouts


def count_full_combinations(instance: Instance) -> int:
    total = 1
    for m in instance.machines_per_stage:
        total *= len(_stage_layouts(instance.n, m))
    return total


def _earliest_times(instance: Instance, layout: Sequence[MachineOrders]) -> Optional[List[List[int]]]:
    """Least start times under the fixed orders, or ``None`` on deadlock."""
    n, K = instance.n, instance.K
    P = instance.proc_time
    node = lambda j, k: j * K + k  # noqa: E731
    edges: List[List[Tuple[int, int]]] = [[] for _ in range(n * K)]
    indeg = [0] * (n * K)

    def edge(a, b, w):
        edges[a].append((b, w))
        indeg[b] += 1

    for j in range(n):
        for k in range(1, K):
            edge(node(j, k - 1), node(j, k), P[j][k - 1])
    for k in range(K):
        for seq in layout[k]:
            for i, j in zip(seq, seq[1:]):
                if k < K - 1:
                    edge(node(i, k + 1), node(j, k), 0)
                else:
                    edge(node(i, k), node(j, k), P[i][k])
    dist = [0] * (n * K)
    ready = [v for v in range(n * K) if indeg[v] == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for w, wt in edges[v]:
            if dist[v] + wt > dist[w]:
                dist[w] = dist[v] + wt
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    if seen < n * K:
        return None
    return [[dist[node(j, k)] for k in range(K)] for j in range(n)]


def _objectives_from_starts(instance: Instance, layout, S) -> ObjectiveVector:
    n, K = instance.n, instance.K
    P = instance.proc_time
    C = [[S[j][k + 1] if k < K - 1 else S[j][k] + P[j][k] for k in range(K)] for j in range(n)]
    e_block = sum(instance.energy_block[k] * (C[j][k] - S[j][k] - P[j][k]) for j in range(n) for k in range(K))
    e_idle = 0
    for k in range(K):
        for seq in layout[k]:
            if seq:
                occupied = sum(C[j][k] - S[j][k] for j in seq)
                e_idle += instance.energy_idle[k] * (C[seq[-1]][k] - S[seq[0]][k] - occupied)
    cmax = max(C[j][K - 1] for j in range(n))
    return ObjectiveVector(cmax, instance.processing_energy + e_block + e_idle)


def _timing_lp(instance: Instance, layout):
    """Matrices for the timing LP over starts ``S[j][k]`` plus a makespan column."""
    import numpy as np

    n, K = instance.n, instance.K
    P = instance.proc_time
    nv = n * K + 1
    cm = n * K
    col = lambda j, k: j * K + k  # noqa: E731

    tec = np.zeros(nv)
    const = float(instance.processing_energy)

    def add_completion(vec, j, k, w):
        nonlocal const
        if k < K - 1:
            vec[col(j, k + 1)] += w
        else:
            vec[col(j, k)] += w
            const += w * P[j][k]

    for j in range(n):
        for k in range(K - 1):
            eb = instance.energy_block[k]
            tec[col(j, k + 1)] += eb
            tec[col(j, k)] -= eb
            const -= eb * P[j][k]
    for k in range(K):
        ei = instance.energy_idle[k]
        for seq in layout[k]:
            if not seq:
                continue
            add_completion(tec, seq[-1], k, ei)
            tec[col(seq[0], k)] -= ei
            for j in seq:
                add_completion(tec, j, k, -ei)
                tec[col(j, k)] += ei

    rows, rhs = [], []

    def geq(coeffs, bound):
        row = np.zeros(nv)
        for c, w in coeffs:
            row[c] += w
        rows.append(-row)
        rhs.append(-bound)

    for j in range(n):
        for k in range(1, K):
            geq([(col(j, k), 1), (col(j, k - 1), -1)], P[j][k - 1])
        geq([(cm, 1), (col(j, K - 1), -1)], P[j][K - 1])
    for k in range(K):
        for seq in layout[k]:
            for i, j in zip(seq, seq[1:]):
                if k < K - 1:
                    geq([(col(j, k), 1), (col(i, k + 1), -1)], 0)
                else:
                    geq([(col(j, k), 1), (col(i, k), -1)], P[i][k])
    return tec, const, np.array(rows), np.array(rhs), cm


def _snap(v: float) -> float:
    r = round(v)
    return int(r) if abs(v - r) <= 1e-6 else v


def _optimal_timing_points(instance: Instance, layout, cmax_min: int) -> List[ObjectiveVector]:
    """Least energy for every integer makespan bound from ``cmax_min`` up to the
    makespan of the unconstrained energy optimum.  The timing constraints are
    difference constraints, so each LP has an integral optimum."""
    import numpy as np
    from scipy.optimize import linprog

    tec, const, A, b, cm = _timing_lp(instance, layout)
    nv = len(tec)
    unit = np.zeros(nv)
    unit[cm] = 1.0

    def lp(c, A_ub, b_ub):
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * nv, method="highs")
        if res.status != 0:
            raise RuntimeError(f"timing LP failed: {res.message}")
        return res.x

    x = lp(tec, A, b)
    tec_min = float(tec @ x + const)
    x = lp(unit, np.vstack([A, tec]), np.append(b, tec_min - const + 1e-7))
    last = ObjectiveVector(_snap(float(x[cm])), _snap(tec_min))
    points = []
    A_cm = np.vstack([A, unit])
    for bound in range(cmax_min, math.ceil(last.cmax - 1e-9)):
        x = lp(tec, A_cm, np.append(b, bound))
        points.append(ObjectiveVector(bound, _snap(float(tec @ x + const))))
    points.append(last)
    return nondominated_points(points)


def exhaustive_front(
    instance: Instance,
    mode: str = "permutation",
    cap: int = 1_000_000,
    timing: str = "earliest",
    with_witness: bool = False,
):
    """Exact non-dominated front of the chosen search space.

    Returns a list of objective vectors sorted by makespan, or
    ``(front, witnesses)`` when ``with_witness`` is set, where ``witnesses``
    maps each front point to one permutation or machine layout reaching it.
    """
    if mode == "permutation":
        if math.factorial(instance.n) > cap:
            raise OracleCapError(f"{instance.n}! permutations exceed the cap {cap}")
        witnesses: Dict[ObjectiveVector, object] = {}
        for perm in itertools.permutations(range(instance.n)):
            witnesses.setdefault(evaluate_perm(instance, perm), perm)
        front = nondominated_points(witnesses)
    elif mode == "full":
        if instance.n > 5 or instance.K > 3:
            raise OracleCapError("full mode is limited to n <= 5 and K <= 3")
        if timing not in ("earliest", "optimal"):
            raise ValueError(f"unknown timing {timing!r}")
        total = count_full_combinations(instance)
        if total > cap:
            raise OracleCapError(f"{total} assignment/order combinations exceed the cap {cap}")
        stages = [_stage_layouts(instance.n, m) for m in instance.machines_per_stage]
        witnesses = {}
        for layout in itertools.product(*stages):
            S = _earliest_times(instance, layout)
            if S is None:
                continue
            point = _objectives_from_starts(instance, layout, S)
            points = [point]
            if timing == "optimal":
                points = _optimal_timing_points(instance, layout, point.cmax)
            for p in points:
                witnesses.setdefault(p, layout)
        front = nondominated_points(witnesses)
    else:
        raise ValueError(f"unknown oracle mode {mode!r}")
    if with_witness:
        return front, {p: witnesses[p] for p in front}
    return front
