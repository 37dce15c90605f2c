"""Dominance, non-dominated archives, crowding distance and front quality indicators.

All objectives are minimised.  Indicators work in a normalised space where
each objective is mapped onto [0, 1] using bounds taken over every front of
one comparison; the hypervolume reference point sits at (1.2, 1.2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Sequence, Tuple

from .core import ObjectiveVector

Entry = Tuple[Tuple[int, ...], ObjectiveVector]

REFERENCE_POINT = 1.2


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def weakly_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1]


def nondominated(entries: Iterable[Entry]) -> List[Entry]:
    """Non-dominated subset of ``entries``; duplicate objective points keep the first seen."""
    archive = ParetoArchive()
    for perm, obj in entries:
        archive.insert(perm, obj)
    return archive.entries


def nondominated_points(points: Iterable[Sequence[float]]) -> List[ObjectiveVector]:
    """Non-dominated, deduplicated point set sorted by ascending makespan."""
    best: List[ObjectiveVector] = []
    for p in sorted({ObjectiveVector(*p) for p in points}):
        if not best or p[1] < best[-1][1]:
            best.append(p)
    return best


class ParetoArchive:
    """Unbounded set of mutually non-dominated ``(permutation, objectives)`` entries."""

    def __init__(self, entries: Iterable[Entry] = ()):
        self.entries: List[Entry] = []
        for perm, obj in entries:
            self.insert(perm, obj)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    def insert(self, perm: Sequence[int], obj: Sequence[int]) -> bool:
        obj = ObjectiveVector(*obj)
        for _, other in self.entries:
            if other == obj or dominates(other, obj):
                return False
        self.entries = [e for e in self.entries if not dominates(obj, e[1])]
        self.entries.append((tuple(perm), obj))
        return True

    def merge(self, entries: Iterable[Entry]) -> bool:
        changed = False
        for perm, obj in entries:
            changed |= self.insert(perm, obj)
        return changed

    def points(self) -> List[ObjectiveVector]:
        return sorted(obj for _, obj in self.entries)

    def copy(self) -> "ParetoArchive":
        clone = ParetoArchive()
        clone.entries = list(self.entries)
        return clone


def crowding_distance(front: Sequence[Sequence[float]]) -> List[float]:
    size = len(front)
    if size == 0:
        return []
    dist = [0.0] * size
    for obj in range(2):
        values = [p[obj] for p in front]
        lo, hi = min(values), max(values)
        for i, v in enumerate(values):
            if v == lo or v == hi:
                dist[i] = math.inf
        if hi == lo:
            continue
        order = sorted(range(size), key=lambda i: (values[i], i))
        for pos in range(1, size - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (values[order[pos + 1]] - values[order[pos - 1]]) / (hi - lo)
    return dist


@dataclass(frozen=True)
class NormalizationContext:
    cmax_min: float
    cmax_max: float
    tec_min: float
    tec_max: float
    reference: float = REFERENCE_POINT

    def __post_init__(self) -> None:
        if self.cmax_max < self.cmax_min or self.tec_max < self.tec_min:
            raise ValueError("normalisation bounds need max >= min on both objectives")

    @classmethod
    def from_fronts(cls, fronts: Iterable[Iterable[Sequence[float]]]) -> "NormalizationContext":
        pts = [p for front in fronts for p in front]
        if not pts:
            raise ValueError("cannot normalise over an empty universe")
        return cls(
            min(p[0] for p in pts),
            max(p[0] for p in pts),
            min(p[1] for p in pts),
            max(p[1] for p in pts),
        )

    def normalize(self, point: Sequence[float]) -> Tuple[float, float]:
        def scale(v, lo, hi):
            return 0.0 if hi == lo else (v - lo) / (hi - lo)

        return (
            scale(point[0], self.cmax_min, self.cmax_max),
            scale(point[1], self.tec_min, self.tec_max),
        )


def hypervolume(front: Iterable[Sequence[float]], ctx: NormalizationContext) -> float:
    """Area dominated by the normalised front inside the box up to the reference point."""
    ref = ctx.reference
    pts = []
    for p in front:
        x, y = ctx.normalize(p)
        pts.append((min(max(x, 0.0), ref), min(max(y, 0.0), ref)))
    if not pts:
        return 0.0
    pts.sort()
    area = 0.0
    best_y = ref
    sweep = []
    for x, y in pts:
        if y < best_y:
            sweep.append((x, y))
            best_y = y
    for (x, y), nxt in zip(sweep, sweep[1:] + [(ref, 0.0)]):
        area += (nxt[0] - x) * (ref - y)
    return area


def generational_distance(
    front: Sequence[Sequence[float]],
    reference_front: Sequence[Sequence[float]],
    ctx: NormalizationContext,
) -> float:
    if not front or not reference_front:
        raise ValueError("generational distance needs non-empty front and reference")
    ref = [ctx.normalize(r) for r in reference_front]
    total = 0.0
    for p in front:
        x, y = ctx.normalize(p)
        total += min((x - rx) ** 2 + (y - ry) ** 2 for rx, ry in ref)
    return math.sqrt(total) / len(front)


def build_reference_front(
    fronts: Sequence[Iterable[Sequence[float]]],
) -> Tuple[List[ObjectiveVector], NormalizationContext]:
    fronts = [list(f) for f in fronts]
    if not fronts:
        raise ValueError("need at least one front")
    union = [p for f in fronts for p in f]
    return nondominated_points(union), NormalizationContext.from_fronts(fronts)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_front(path, points: Iterable[Sequence[float]]) -> None:
    rows = sorted((p[0], p[1]) for p in points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cmax", "tec"])
        writer.writerows(rows)


def _number(text: str):
    value = float(text)
    return int(value) if value.is_integer() else value


def read_front(path) -> List[ObjectiveVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["cmax", "tec"]:
            raise ValueError(f"{path}: expected header 'cmax,tec', got {reader.fieldnames}")
        return [ObjectiveVector(_number(r["cmax"]), _number(r["tec"])) for r in reader]


METRIC_FIELDS = ["instance", "method", "rep", "hv", "gd"]


def write_metrics(path, rows: Iterable[dict], append: bool = False) -> None:
    path = Path(path)
    new = not append or not path.exists()
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in METRIC_FIELDS})


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_metrics(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {**r, "rep": int(r["rep"]), "hv": float(r["hv"]), "gd": float(r["gd"])}
            for r in csv.DictReader(fh)
        ]


def front_points(entries: Iterable[Entry]) -> List[ObjectiveVector]:
    return sorted(obj for _, obj in entries)

