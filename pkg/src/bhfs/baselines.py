"""Comparison methods: permutation NSGA-II and multi-objective iterated greedy (MOIG)."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .core import Evaluator, Instance
from .pareto import ParetoArchive, crowding_distance, dominates
from .ripg import (
    InvalidConfigError,
    RunTrace,
    StopRule,
    _check_stop,
    greedy_phase,
    initialize,
    neh_makespan,
    neh_tec,
    snapshot,
)


@dataclass
class Nsga2Config:
    population: int = 50
    crossover_prob: float = 0.9
    mutation_prob: float = 0.2
    time_budget_ms: int = 1000
    rng_seed: int = 0
    iter_cap: Optional[int] = None
    seed_neh: bool = True

    def validate(self, instance: Instance) -> None:
        if self.population < 4 or self.population % 2:
            raise InvalidConfigError(f"population must be even and >= 4, got {self.population}")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidConfigError(f"{name} must lie in [0, 1], got {p}")
        _check_stop(self.time_budget_ms, self.iter_cap)


@dataclass
class MoigConfig:
    d: int = 3
    time_budget_ms: int = 1000
    rng_seed: int = 0
    iter_cap: Optional[int] = None

    def validate(self, instance: Instance) -> None:
        if not 1 <= self.d < instance.n:
            raise InvalidConfigError(f"destruction size {self.d} must be in [1, {instance.n - 1}]")
        _check_stop(self.time_budget_ms, self.iter_cap)


def fast_nondominated_sort(points: Sequence[Sequence[float]]) -> List[List[int]]:
    """Rank partition of point indices: front 0 is non-dominated, front 1 after removing it, ..."""
    size = len(points)
    dominated_by: List[List[int]] = [[] for _ in range(size)]
    counts = [0] * size
    for i in range(size):
        for j in range(i + 1, size):
            if dominates(points[i], points[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(points[j], points[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = []
    current = [i for i in range(size) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def order_crossover(a: Sequence[int], b: Sequence[int], rng: random.Random) -> Tuple[int, ...]:
    """OX: keep a random slice of ``a`` and fill the rest in ``b``'s order."""
    n = len(a)
    i, j = sorted(rng.sample(range(n + 1), 2)) if n > 1 else (0, n)
    child: List[Optional[int]] = [None] * n
    child[i:j] = a[i:j]
    kept = set(a[i:j])
    fill = iter(job for job in b if job not in kept)
    for pos in range(n):
        if child[pos] is None:
            child[pos] = next(fill)
    return tuple(child)


def swap_mutation(perm: Sequence[int], rng: random.Random) -> Tuple[int, ...]:
    seq = list(perm)
    if len(seq) > 1:
        i, j = rng.sample(range(len(seq)), 2)
        seq[i], seq[j] = seq[j], seq[i]
    return tuple(seq)


def _rank_and_crowding(objs) -> Tuple[List[int], List[float], List[List[int]]]:
    fronts = fast_nondominated_sort(objs)
    rank = [0] * len(objs)
    crowd = [0.0] * len(objs)
    for r, front in enumerate(fronts):
        cd = crowding_distance([objs[i] for i in front])
        for i, c in zip(front, cd):
            rank[i] = r
            crowd[i] = c
    return rank, crowd, fronts


def _tournament(rank, crowd, rng: random.Random) -> int:
    a, b = rng.randrange(len(rank)), rng.randrange(len(rank))
    if rank[a] != rank[b]:
        return a if rank[a] < rank[b] else b
    if crowd[a] != crowd[b]:
        return a if crowd[a] > crowd[b] else b
    return a


def survive(objs, size: int) -> List[int]:
    """Elitist truncation: whole ranks first, the split rank by descending crowding."""
    _, crowd, fronts = _rank_and_crowding(objs)
    chosen: List[int] = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            continue
        rest = sorted(front, key=lambda i: (-crowd[i], i))
        chosen.extend(rest[: size - len(chosen)])
        break
    return chosen


def _without_clones(perms, objs, size):
    """Drop repeated permutations, topping up with clones only if too few remain."""
    seen = set()
    unique, clones = [], []
    for p, o in zip(perms, objs):
        (clones if p in seen else unique).append((p, o))
        seen.add(p)
    pool = unique + clones[: max(0, size - len(unique))]
    return [p for p, _ in pool], [o for _, o in pool]


def nsga2_run(instance: Instance, config: Nsga2Config,
              initial_population: Optional[Sequence[Sequence[int]]] = None,
              keep_points: bool = False) -> Tuple[ParetoArchive, RunTrace]:
    config.validate(instance)
    rng = random.Random(config.rng_seed)
    evaluator = Evaluator(instance)
    stop = StopRule(config.time_budget_ms, config.iter_cap)
    trace = RunTrace()
    archive = ParetoArchive()

    if initial_population is not None:
        pop = [tuple(p) for p in initial_population]
    else:
        pop = []
        if config.seed_neh:
            pop += [neh_makespan(instance, evaluator), neh_tec(instance, evaluator)]
        while len(pop) < config.population:
            perm = list(range(instance.n))
            rng.shuffle(perm)
            pop.append(tuple(perm))
    pop = pop[: config.population]
    objs = [evaluator(p) for p in pop]
    for p, o in zip(pop, objs):
        archive.insert(p, o)
    snapshot(trace, archive, evaluator, stop, keep_points)

    while stop.keep_going(trace.iterations):
        rank, crowd, _ = _rank_and_crowding(objs)
        children = []
        while len(children) < len(pop):
            a = pop[_tournament(rank, crowd, rng)]
            b = pop[_tournament(rank, crowd, rng)]
            if rng.random() < config.crossover_prob:
                c1, c2 = order_crossover(a, b, rng), order_crossover(b, a, rng)
            else:
                c1, c2 = a, b
            for child in (c1, c2):
                if rng.random() < config.mutation_prob:
                    child = swap_mutation(child, rng)
                children.append(child)
        child_objs = []
        for child in children:
            o = evaluator(child)
            child_objs.append(o)
            archive.insert(child, o)
        union, union_objs = _without_clones(pop + children, objs + child_objs, len(pop))
        keep = survive(union_objs, len(pop))
        pop = [union[i] for i in keep]
        objs = [union_objs[i] for i in keep]
        trace.iterations += 1
        snapshot(trace, archive, evaluator, stop, keep_points)

    trace.evaluations = evaluator.evaluations
    trace.elapsed_ms = stop.elapsed_ms()
    trace.final_front = archive.points()
    return archive, trace


def moig_run(instance: Instance, config: MoigConfig,
             keep_points: bool = False) -> Tuple[ParetoArchive, RunTrace]:
    """Destruction/construction over a uniformly chosen archive member, nothing else."""
    config.validate(instance)
    rng = random.Random(config.rng_seed)
    evaluator = Evaluator(instance)
    stop = StopRule(config.time_budget_ms, config.iter_cap)
    trace = RunTrace()

    archive = initialize(instance, evaluator)
    snapshot(trace, archive, evaluator, stop, keep_points)
    while stop.keep_going(trace.iterations):
        perm = archive.entries[rng.randrange(len(archive))][0]
        archive.merge(greedy_phase(instance, perm, config.d, rng, evaluator))
        trace.iterations += 1
        snapshot(trace, archive, evaluator, stop, keep_points)

    trace.evaluations = evaluator.evaluations
    trace.elapsed_ms = stop.elapsed_ms()
    trace.final_front = archive.points()
    return archive, trace
