"""Refined Iterated Pareto Greedy (R-IPG).

One iteration: select -> greedy destruction/reconstruction -> merge ->
select -> insertion local search -> merge -> refine the whole front.
Selection takes the most isolated solution (largest crowding distance) when
the front changed during the previous iteration and a uniformly random one
otherwise.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .core import Evaluator, Instance, ObjectiveVector
from .pareto import (
    Entry,
    NormalizationContext,
    ParetoArchive,
    crowding_distance,
    dominates,
    hypervolume,
    nondominated,
)


class InvalidConfigError(ValueError):
    pass


@dataclass
class RipgConfig:
    d: int = 3
    loop_size: int = 10
    time_budget_ms: int = 1000
    rng_seed: int = 0
    iter_cap: Optional[int] = None

    def validate(self, instance: Instance) -> None:
        if self.d < 1:
            raise InvalidConfigError(f"destruction size must be >= 1, got {self.d}")
        if self.d >= instance.n:
            raise InvalidConfigError(f"destruction size {self.d} must be below the job count {instance.n}")
        if self.loop_size < 0:
            raise InvalidConfigError(f"loop_size must be >= 0, got {self.loop_size}")
        _check_stop(self.time_budget_ms, self.iter_cap)


@dataclass
class RunTrace:
    iterations: int = 0
    evaluations: int = 0
    elapsed_ms: float = 0.0
    snapshots: List[dict] = field(default_factory=list)
    final_front: List[ObjectiveVector] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s, sort_keys=True) + "\n" for s in self.snapshots)


def _check_stop(time_budget_ms, iter_cap) -> None:
    if iter_cap is not None:
        if iter_cap < 0:
            raise InvalidConfigError(f"iteration cap must be >= 0, got {iter_cap}")
    elif time_budget_ms is None or time_budget_ms <= 0:
        raise InvalidConfigError(f"time budget must be positive, got {time_budget_ms}")


class StopRule:
    """Iteration cap when given (deterministic test mode), wall clock otherwise."""

    def __init__(self, time_budget_ms: Optional[int], iter_cap: Optional[int]):
        self.iter_cap = iter_cap
        self.budget_s = None if time_budget_ms is None else time_budget_ms / 1000.0
        self.t0 = time.perf_counter()

    def elapsed_ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1000.0

    def out_of_time(self) -> bool:
        if self.iter_cap is not None:
            return False
        return time.perf_counter() - self.t0 >= self.budget_s

    def keep_going(self, iterations_done: int) -> bool:
        if self.iter_cap is not None:
            return iterations_done < self.iter_cap
        return not self.out_of_time()


def snapshot(trace: RunTrace, archive: ParetoArchive, evaluator: Evaluator, stop: StopRule,
             keep_points: bool) -> None:
    pts = archive.points()
    record = {
        "iteration": trace.iterations,
        "elapsed_ms": round(stop.elapsed_ms(), 3),
        "archive_size": len(pts),
        "hv": hypervolume(pts, NormalizationContext.from_fronts([pts])),
        "evaluations": evaluator.evaluations,
    }
    if keep_points:
        record["points"] = [list(p) for p in pts]
    trace.snapshots.append(record)


# ---------------------------------------------------------------------------
# Initialisation
# ---------------------------------------------------------------------------


def _neh(instance: Instance, evaluate, key) -> Tuple[int, ...]:
    order = sorted(range(instance.n), key=lambda j: (-sum(instance.proc_time[j]), j))
    seq = [order[0]]
    for job in order[1:]:
        best, best_val = None, None
        for pos in range(len(seq) + 1):
            cand = seq[:pos] + [job] + seq[pos:]
            val = key(evaluate(cand))
            if best_val is None or val < best_val:
                best, best_val = cand, val
        seq = best
    return tuple(seq)


def neh_makespan(instance: Instance, evaluator: Optional[Evaluator] = None) -> Tuple[int, ...]:
    return _neh(instance, evaluator or Evaluator(instance), lambda v: v.cmax)


def neh_tec(instance: Instance, evaluator: Optional[Evaluator] = None) -> Tuple[int, ...]:
    return _neh(instance, evaluator or Evaluator(instance), lambda v: v.tec)


def initialize(instance: Instance, evaluator: Optional[Evaluator] = None) -> ParetoArchive:
    evaluator = evaluator or Evaluator(instance)
    archive = ParetoArchive()
    for seq in (neh_makespan(instance, evaluator), neh_tec(instance, evaluator)):
        archive.insert(seq, evaluator(seq))
    return archive


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def select(archive: ParetoArchive, front_changed: bool, rng: random.Random) -> Tuple[int, ...]:
    if not len(archive):
        raise ValueError("cannot select from an empty archive")
    entries = archive.entries
    if not front_changed or len(entries) == 1:
        return entries[rng.randrange(len(entries))][0]
    cd = crowding_distance([obj for _, obj in entries])
    top = max(cd)
    tied = [i for i, v in enumerate(cd) if v == top]
    return entries[tied[rng.randrange(len(tied))]][0]


def destruct(perm: Sequence[int], d: int, rng: random.Random) -> Tuple[List[int], List[int]]:
    """Remove ``d`` random jobs; returns ``(partial, removed)`` with removal order preserved."""
    positions = rng.sample(range(len(perm)), d)
    removed = [perm[p] for p in positions]
    drop = set(positions)
    partial = [job for p, job in enumerate(perm) if p not in drop]
    return partial, removed


def construct(partial: Sequence[int], removed: Sequence[int], evaluate) -> List[Entry]:
    nds: List[Entry] = [(tuple(partial), None)]
    for job in removed:
        nws = []
        for seq, _ in nds:
            for pos in range(len(seq) + 1):
                cand = seq[:pos] + (job,) + seq[pos:]
                nws.append((cand, evaluate(cand)))
        nds = nondominated(nws)
    return nds


def greedy_phase(instance: Instance, perm: Sequence[int], d: int, rng: random.Random,
                 evaluator: Optional[Evaluator] = None) -> List[Entry]:
    """Destroy ``d`` jobs and rebuild, keeping every non-dominated reconstruction.

    The input sequence competes in the final filter, so the result always
    holds an entry that is at least as good as ``perm`` on both objectives.
    """
    if d < 1 or d >= len(perm):
        raise InvalidConfigError(f"destruction size {d} must be in [1, {len(perm) - 1}]")
    evaluator = evaluator or Evaluator(instance)
    partial, removed = destruct(perm, d, rng)
    built = construct(partial, removed, evaluator)
    return nondominated(built + [(tuple(perm), evaluator(perm))])


def local_search(instance: Instance, perm: Sequence[int], rng: random.Random,
                 evaluator: Optional[Evaluator] = None) -> List[Entry]:
    if len(perm) < 2:
        raise ValueError("local search needs at least two jobs")
    evaluator = evaluator or Evaluator(instance)
    pos = rng.randrange(len(perm))
    job = perm[pos]
    rest = tuple(perm[:pos]) + tuple(perm[pos + 1:])
    cands = []
    for j in range(len(perm)):
        seq = rest[:j] + (job,) + rest[j:]
        cands.append((seq, evaluator(seq)))
    return nondominated(cands)


def _two_positions(n: int, rng: random.Random) -> Tuple[int, int]:
    i = rng.randrange(n)
    j = rng.randrange(n - 1)
    if j >= i:
        j += 1
    return i, j


def insertion_move(perm: Sequence[int], rng: random.Random) -> Tuple[int, ...]:
    if len(perm) < 2:
        return tuple(perm)
    i, j = _two_positions(len(perm), rng)
    seq = list(perm)
    job = seq.pop(i)
    seq.insert(j, job)
    return tuple(seq)


def interchange_move(perm: Sequence[int], rng: random.Random) -> Tuple[int, ...]:
    if len(perm) < 2:
        return tuple(perm)
    i, j = _two_positions(len(perm), rng)
    seq = list(perm)
    seq[i], seq[j] = seq[j], seq[i]
    return tuple(seq)


def refine(instance: Instance, front: Sequence[Entry], loop_size: int, rng: random.Random,
           evaluator: Optional[Evaluator] = None) -> List[Entry]:
    evaluator = evaluator or Evaluator(instance)
    out = []
    for perm, obj in front:
        perm = tuple(perm)
        obj = obj if obj is not None else evaluator(perm)
        for _ in range(loop_size):
            counter = 1
            while counter < 3:
                move = insertion_move if counter == 1 else interchange_move
                cand = move(perm, rng)
                cand_obj = evaluator(cand)
                if dominates(cand_obj, obj):
                    perm, obj = cand, cand_obj
                    counter = 1
                else:
                    counter += 1
        out.append((perm, obj))
    return nondominated(out)


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def run(instance: Instance, config: RipgConfig, keep_points: bool = False) -> Tuple[ParetoArchive, RunTrace]:
    config.validate(instance)
    rng = random.Random(config.rng_seed)
    evaluator = Evaluator(instance)
    stop = StopRule(config.time_budget_ms, config.iter_cap)
    trace = RunTrace()

    archive = initialize(instance, evaluator)
    snapshot(trace, archive, evaluator, stop, keep_points)
    front_changed = True
    while stop.keep_going(trace.iterations):
        changed = False

        perm = select(archive, front_changed, rng)
        changed |= archive.merge(greedy_phase(instance, perm, config.d, rng, evaluator))
        if stop.out_of_time():
            snapshot(trace, archive, evaluator, stop, keep_points)
            break

        perm = select(archive, front_changed, rng)
        changed |= archive.merge(local_search(instance, perm, rng, evaluator))
        if stop.out_of_time():
            snapshot(trace, archive, evaluator, stop, keep_points)
            break

        refined = refine(instance, archive.entries, config.loop_size, rng, evaluator)
        if sorted(o for _, o in refined) != archive.points():
            changed = True
        archive = ParetoArchive(refined)

        front_changed = changed
        trace.iterations += 1
        snapshot(trace, archive, evaluator, stop, keep_points)

    trace.evaluations = evaluator.evaluations
    trace.elapsed_ms = stop.elapsed_ms()
    trace.final_front = archive.points()
    return archive, trace
