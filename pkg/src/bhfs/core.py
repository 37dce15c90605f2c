"""Problem instances, the blocking list-scheduling decoder and objective evaluation.

A permutation fixes the order in which jobs enter the first stage.  Every
later stage serves jobs first-come-first-served by the instant they finished
processing upstream (ties broken by permutation rank).  A job that finishes
processing while every downstream machine is occupied stays on its current
machine (blocking it) until one frees up.  The last stage never blocks.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Sequence, Tuple

INSTANCE_HEADER = "bhfs-instance v1"


class InvalidInputError(ValueError):
    """Raised for malformed instances, permutations or files."""


class InconsistentScheduleError(ValueError):
    """Raised when a schedule violates a timing or occupation constraint.

    ``constraint`` carries the model row family that is violated (``eq06``,
    ``eq04`` ...), the same tag used for constraint names in LP exports.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"[{constraint}] {message}")
        self.constraint = constraint


class ObjectiveVector(NamedTuple):
    cmax: int
    tec: int


@dataclass(frozen=True)
class Instance:
    proc_time: Tuple[Tuple[int, ...], ...]
    machines_per_stage: Tuple[int, ...]
    energy_proc: Tuple[int, ...]
    energy_idle: Tuple[int, ...]
    energy_block: Tuple[int, ...]
    id: str = "instance"
    require_hybrid: bool = True

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(v) for v in row) for row in self.proc_time)
        object.__setattr__(self, "proc_time", rows)
        for name in ("machines_per_stage", "energy_proc", "energy_idle", "energy_block"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))

        if not rows:
            raise InvalidInputError("instance needs at least one job")
        K = len(rows[0])
        if K < 2:
            raise InvalidInputError(f"instance needs at least two stages, got {K}")
        for i, row in enumerate(rows):
            if len(row) != K:
                raise InvalidInputError(f"proc_time row {i} has {len(row)} entries, expected {K}")
            if min(row) < 0:
                raise InvalidInputError(f"proc_time row {i} has a negative entry")
        for name in ("machines_per_stage", "energy_proc", "energy_idle", "energy_block"):
            values = getattr(self, name)
            if len(values) != K:
                raise InvalidInputError(f"{name} has length {len(values)}, expected {K}")
            if min(values) < 0:
                raise InvalidInputError(f"{name} has a negative entry")
        if min(self.machines_per_stage) < 1:
            raise InvalidInputError("every stage needs at least one machine")
        if self.require_hybrid and max(self.machines_per_stage) < 2:
            raise InvalidInputError(
                "hybrid flow shop needs a stage with parallel machines "
                "(pass require_hybrid=False for a pure flow shop)"
            )

    @property
    def n(self) -> int:
        return len(self.proc_time)

    @property
    def K(self) -> int:
        return len(self.machines_per_stage)

    @property
    def total_processing(self) -> Tuple[int, ...]:
        """Per-stage sum of processing times (TPT_k)."""
        return tuple(sum(row[k] for row in self.proc_time) for k in range(self.K))

    @property
    def processing_energy(self) -> int:
        return sum(t * e for t, e in zip(self.total_processing, self.energy_proc))


@dataclass
class MachineStats:
    earliest_start: int
    latest_completion: int
    busy: int
    blocked: int
    used: bool

    @property
    def idle(self) -> int:
        if not self.used:
            return 0
        return self.latest_completion - self.earliest_start - self.busy - self.blocked


@dataclass
class Schedule:
    start: List[List[int]]
    completion: List[List[int]]
    block: List[List[int]]
    assignment: List[List[int]]
    machine_timelines: Dict[Tuple[int, int], List[Tuple[int, int, int]]] = field(default_factory=dict)

    @classmethod
    def from_rows(
        cls,
        instance: Instance,
        start: Sequence[Sequence[int]],
        completion: Sequence[Sequence[int]],
        assignment: Sequence[Sequence[int]],
    ) -> "Schedule":
        """Build a schedule from start/completion/machine matrices, deriving blocking."""
        P = instance.proc_time
        S = [list(r) for r in start]
        C = [list(r) for r in completion]
        X = [list(r) for r in assignment]
        BT = [[C[i][k] - S[i][k] - P[i][k] for k in range(instance.K)] for i in range(len(S))]
        return cls(S, C, BT, X, _timelines(instance, S, C, X))


@dataclass
class ObjectiveReport:
    cmax: int
    tec: int
    tbt: int
    tidle: int
    energy_processing: int
    energy_idle: int
    energy_blocking: int

    @property
    def vector(self) -> ObjectiveVector:
        return ObjectiveVector(self.cmax, self.tec)


def _timelines(instance, S, C, X):
    lines: Dict[Tuple[int, int], List[Tuple[int, int, int]]] = {
        (k, m): [] for k in range(instance.K) for m in range(instance.machines_per_stage[k])
    }
    for i in range(len(S)):
        for k in range(instance.K):
            lines.setdefault((k, X[i][k]), []).append((i, S[i][k], C[i][k]))
    for key in lines:
        lines[key].sort(key=lambda iv: (iv[1], iv[2], iv[0]))
    return lines


def check_permutation(instance: Instance, perm: Sequence[int]) -> Tuple[int, ...]:
    order = tuple(int(j) for j in perm)
    if len(order) != instance.n or sorted(order) != list(range(instance.n)):
        raise InvalidInputError(
            f"permutation {list(order)} is not a permutation of 0..{instance.n - 1}"
        )
    return order


def _simulate(instance: Instance, order: Sequence[int], full: bool):
    """Event-driven blocking simulation of ``order`` (any subset of jobs).

    Returns ``(cmax, tec, tbt, tidle, e_idle, e_block, e_proc)`` and, when
    ``full`` is set, the start/completion/assignment matrices as well.
    """
    P = instance.proc_time
    M = instance.machines_per_stage
    K = instance.K
    last = K - 1
    n = instance.n

    start = [[0] * K for _ in range(n)]
    mach = [[0] * K for _ in range(n)]
    comp = [[0] * K for _ in range(n)] if full else None

    occupant_free = [[True] * M[k] for k in range(K)]
    free_since = [[0] * M[k] for k in range(K)]
    first_start = [[-1] * M[k] for k in range(K)]
    last_end = [[0] * M[k] for k in range(K)]
    occupied = [[0] * M[k] for k in range(K)]

    waiting: List[list] = [[] for _ in range(K)]
    events: list = []
    tbt = 0
    blocked_by_stage = [0] * K

    def pick(k):
        best = -1
        best_t = 0
        fr = occupant_free[k]
        fs = free_since[k]
        for m in range(M[k]):
            if fr[m] and (best < 0 or fs[m] < best_t):
                best = m
                best_t = fs[m]
        return best

    def occupy(j, r, k, m, t):
        occupant_free[k][m] = False
        mach[j][k] = m
        start[j][k] = t
        if first_start[k][m] < 0:
            first_start[k][m] = t
        heapq.heappush(events, (t + P[j][k], r, j, k))

    def release(j, k, t):
        m = mach[j][k]
        occupant_free[k][m] = True
        free_since[k][m] = t
        last_end[k][m] = t
        occupied[k][m] += t - start[j][k]
        if comp is not None:
            comp[j][k] = t

    nxt = 0
    total = len(order)
    t = 0
    while True:
        for k in range(last, 0, -1):
            queue = waiting[k - 1]
            while queue:
                m = pick(k)
                if m < 0:
                    break
                ready_at, r, j = heapq.heappop(queue)
                bt = t - ready_at
                tbt += bt
                blocked_by_stage[k - 1] += bt
                release(j, k - 1, t)
                occupy(j, r, k, m, t)
        while nxt < total:
            m = pick(0)
            if m < 0:
                break
            occupy(order[nxt], nxt, 0, m, t)
            nxt += 1
        if not events:
            break
        t = events[0][0]
        while events and events[0][0] == t:
            _, r, j, k = heapq.heappop(events)
            if k == last:
                release(j, k, t)
            else:
                heapq.heappush(waiting[k], (t, r, j))

    EP, EI, EB = instance.energy_proc, instance.energy_idle, instance.energy_block
    cmax = 0
    for j in order:
        end = start[j][last] + P[j][last]
        if end > cmax:
            cmax = end
    tidle = 0
    e_idle = 0
    for k in range(K):
        for m in range(M[k]):
            if first_start[k][m] >= 0:
                idle = last_end[k][m] - first_start[k][m] - occupied[k][m]
                tidle += idle
                e_idle += idle * EI[k]
    e_block = sum(blocked_by_stage[k] * EB[k] for k in range(K))
    e_proc = sum(P[j][k] * EP[k] for j in order for k in range(K))
    objs = (cmax, e_proc + e_idle + e_block, tbt, tidle, e_idle, e_block, e_proc)
    if not full:
        return objs, None
    return objs, (start, comp, mach)


def decode(instance: Instance, perm: Sequence[int]) -> Schedule:
    """Decode a full permutation into a blocking-feasible timetable."""
    order = check_permutation(instance, perm)
    _, (S, C, X) = _simulate(instance, order, full=True)
    return Schedule.from_rows(instance, S, C, X)


def machine_stats(instance: Instance, sched: Schedule) -> Dict[Tuple[int, int], MachineStats]:
    stats = {}
    P = instance.proc_time
    for (k, m), intervals in sched.machine_timelines.items():
        if not intervals:
            stats[(k, m)] = MachineStats(0, 0, 0, 0, False)
            continue
        stats[(k, m)] = MachineStats(
            earliest_start=min(s for _, s, _ in intervals),
            latest_completion=max(c for _, _, c in intervals),
            busy=sum(P[i][k] for i, _, _ in intervals),
            blocked=sum(sched.block[i][k] for i, _, _ in intervals),
            used=True,
        )
    return stats


def validate_schedule(instance: Instance, sched: Schedule) -> None:
    """Raise :class:`InconsistentScheduleError` on the first violated constraint."""
    n, K = instance.n, instance.K
    P = instance.proc_time
    S, C, BT, X = sched.start, sched.completion, sched.block, sched.assignment
    if not (len(S) == len(C) == len(BT) == len(X) == n):
        raise InvalidInputError(f"schedule has {len(S)} job rows, instance has {n}")
    for i in range(n):
        for k in range(K):
            m = X[i][k]
            if not 0 <= m < instance.machines_per_stage[k]:
                raise InconsistentScheduleError("eq01", f"job {i} stage {k} assigned to machine {m}")
            if C[i][k] != S[i][k] + P[i][k] + BT[i][k]:
                raise InconsistentScheduleError(
                    "eq06", f"job {i} stage {k}: completion {C[i][k]} != start + processing + blocking"
                )
            if BT[i][k] < 0:
                raise InconsistentScheduleError("eq25", f"job {i} stage {k}: negative blocking {BT[i][k]}")
        if BT[i][K - 1] != 0:
            raise InconsistentScheduleError("eq07", f"job {i} blocks at the last stage")
        if S[i][0] < 0:
            raise InconsistentScheduleError("eq25", f"job {i} starts before time zero")
        for k in range(K - 1):
            if C[i][k] != S[i][k + 1]:
                raise InconsistentScheduleError(
                    "eq08", f"job {i} leaves stage {k} at {C[i][k]} but starts stage {k + 1} at {S[i][k + 1]}"
                )
    timelines = _timelines(instance, S, C, X)
    for (k, m), intervals in timelines.items():
        for (a, _, ca), (b, sb, _) in zip(intervals, intervals[1:]):
            if sb < ca:
                raise InconsistentScheduleError(
                    "eq04", f"jobs {a} and {b} overlap on machine {m} of stage {k}"
                )


def evaluate(instance: Instance, sched: Schedule) -> ObjectiveReport:
    validate_schedule(instance, sched)
    stats = machine_stats(instance, sched)
    EI, EB = instance.energy_idle, instance.energy_block
    tbt = sum(sched.block[i][k] for i in range(instance.n) for k in range(instance.K - 1))
    tidle = sum(s.idle for s in stats.values())
    e_idle = sum(s.idle * EI[k] for (k, _), s in stats.items())
    e_block = sum(sched.block[i][k] * EB[k] for i in range(instance.n) for k in range(instance.K))
    e_proc = instance.processing_energy
    cmax = max(row[-1] for row in sched.completion)
    return ObjectiveReport(
        cmax=cmax,
        tec=e_proc + e_idle + e_block,
        tbt=tbt,
        tidle=tidle,
        energy_processing=e_proc,
        energy_idle=e_idle,
        energy_blocking=e_block,
    )


def evaluate_perm(instance: Instance, perm: Sequence[int]) -> ObjectiveVector:
    order = check_permutation(instance, perm)
    objs, _ = _simulate(instance, order, full=False)
    return ObjectiveVector(objs[0], objs[1])


def evaluate_partial(instance: Instance, order: Sequence[int]) -> ObjectiveVector:
    """Objectives of a sequence over a subset of the jobs (the others are ignored)."""
    objs, _ = _simulate(instance, order, full=False)
    return ObjectiveVector(objs[0], objs[1])


def report_perm(instance: Instance, perm: Sequence[int]) -> ObjectiveReport:
    order = check_permutation(instance, perm)
    (cmax, tec, tbt, tidle, e_idle, e_block, e_proc), _ = _simulate(instance, order, full=False)
    return ObjectiveReport(cmax, tec, tbt, tidle, e_proc, e_idle, e_block)


def lower_bounds(instance: Instance) -> Tuple[int, int]:
    tpt = instance.total_processing
    longest_job = max(sum(row) for row in instance.proc_time)
    stage_load = max(-(-t // m) for t, m in zip(tpt, instance.machines_per_stage))
    return max(longest_job, stage_load), instance.processing_energy


class Evaluator:
    """Counting, memoising wrapper around partial-sequence evaluation.

    Search operators share one per run.  The memo is dropped wholesale once
    it grows past ``cache_limit`` entries.
    """

    def __init__(self, instance: Instance, cache_limit: int = 200_000):
        self.instance = instance
        self.evaluations = 0
        self.cache_limit = cache_limit
        self._cache: Dict[Tuple[int, ...], ObjectiveVector] = {}

    def __call__(self, order: Sequence[int]) -> ObjectiveVector:
        key = tuple(order)
        self.evaluations += 1
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        objs, _ = _simulate(self.instance, key, full=False)
        value = ObjectiveVector(objs[0], objs[1])
        if len(self._cache) >= self.cache_limit:
            self._cache.clear()
        self._cache[key] = value
        return value


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def _ints(text: str) -> List[int]:
    try:
        return [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise InvalidInputError(f"expected integers, got {text!r}") from exc


def format_instance(instance: Instance) -> str:
    lines = [
        INSTANCE_HEADER,
        f"id: {instance.id}",
        f"n: {instance.n}",
        f"K: {instance.K}",
        "machines_per_stage: " + " ".join(map(str, instance.machines_per_stage)),
        "proc_time:",
    ]
    lines += [" ".join(map(str, row)) for row in instance.proc_time]
    lines += [
        "energy_proc: " + " ".join(map(str, instance.energy_proc)),
        "energy_idle: " + " ".join(map(str, instance.energy_idle)),
        "energy_block: " + " ".join(map(str, instance.energy_block)),
    ]
    if not instance.require_hybrid:
        lines.append("require_hybrid: false")
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != INSTANCE_HEADER:
        raise InvalidInputError(f"missing header line {INSTANCE_HEADER!r}")
    fields: Dict[str, str] = {}
    rows: List[List[int]] = []
    idx = 1
    while idx < len(lines):
        key, sep, value = lines[idx].partition(":")
        if not sep:
            raise InvalidInputError(f"expected 'key: value', got {lines[idx]!r}")
        key = key.strip()
        if key == "proc_time":
            n = int(fields.get("n", "0"))
            if n <= 0:
                raise InvalidInputError("field 'n' must precede proc_time")
            rows = [_ints(ln) for ln in lines[idx + 1 : idx + 1 + n]]
            if len(rows) != n:
                raise InvalidInputError(f"proc_time has {len(rows)} rows, expected {n}")
            idx += 1 + n
            continue
        fields[key] = value.strip()
        idx += 1
    for key in ("id", "n", "K", "machines_per_stage", "energy_proc", "energy_idle", "energy_block"):
        if key not in fields:
            raise InvalidInputError(f"missing field {key!r}")
    instance = Instance(
        proc_time=rows,
        machines_per_stage=_ints(fields["machines_per_stage"]),
        energy_proc=_ints(fields["energy_proc"]),
        energy_idle=_ints(fields["energy_idle"]),
        energy_block=_ints(fields["energy_block"]),
        id=fields["id"],
        require_hybrid=fields.get("require_hybrid", "true").lower() != "false",
    )
    if instance.K != int(fields["K"]):
        raise InvalidInputError(f"K={fields['K']} disagrees with proc_time width {instance.K}")
    return instance


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def write_instance(instance: Instance, path) -> None:
    Path(path).write_text(format_instance(instance), encoding="utf-8")


def gantt_lines(instance: Instance, sched: Schedule) -> List[str]:
    """One ``job k machine S P BT C`` row per operation, sorted by stage, machine, start."""
    rows = []
    for k in range(instance.K):
        for i in range(instance.n):
            rows.append((k, sched.assignment[i][k], sched.start[i][k], i))
    rows.sort()
    out = ["job k machine S P BT C"]
    for k, m, s, i in rows:
        out.append(
            f"{i} {k} {m} {s} {instance.proc_time[i][k]} {sched.block[i][k]} {sched.completion[i][k]}"
        )
    return out


def table1_instance() -> Instance:
    """The two-stage, two-machines-per-stage illustrative instance (rows as printed)."""
    return Instance(
        proc_time=[[2, 5], [3, 1], [7, 5], [2, 9], [4, 2], [5, 1], [7, 7]],
        machines_per_stage=[2, 2],
        energy_proc=[4, 2],
        energy_idle=[3, 1],
        energy_block=[2, 3],
        id="table1",
    )

