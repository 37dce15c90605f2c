"""CPLEX-LP text export/import for :class:`MilpModel` and solution-file parsing."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Dict, List, Tuple

from .milp import Constraint, MilpModel, Variable

LINE_WIDTH = 200

_ROW_START = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*:(.*)$")


def _num(value) -> str:
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def _terms(terms) -> List[str]:
    out = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        out.append(f"{sign} {_num(abs(coef))} {var}")
    return out


def _wrap(head: str, tokens: List[str]) -> List[str]:
    lines, current = [], head
    for tok in tokens:
        if len(current) + len(tok) + 1 > LINE_WIDTH and current.strip():
            lines.append(current)
            current = "   "
        current += " " + tok
    lines.append(current)
    return lines


def format_lp(model: MilpModel) -> str:
    lines = [f"\\ bhfs MILP export: {model.title} objective={model.objective_mode} bigM={model.big_M}"]
    lines.append("Minimize")
    lines += _wrap(" obj:", _terms(model.objective))
    lines.append("Subject To")
    for row in model.constraints:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[row.sense]
        body = _terms(row.terms) or ["0 " + next(iter(model.variables))]
        lines += _wrap(f" {row.name}:", body + [sense, _num(row.rhs)])
    lines.append("Bounds")
    for var in model.variables.values():
        if not var.binary:
            lines.append(f" {var.name} >= 0")
    generals = [v.name for v in model.variables.values() if v.integer]
    if generals:
        lines.append("General")
        lines += _wrap("", generals)
    lines.append("Binaries")
    binaries = [v.name for v in model.variables.values() if v.binary]
    lines += _wrap("", binaries) if binaries else []
    lines.append("End")
    return "\n".join(lines) + "\n"


def emit_lp(model: MilpModel, path) -> Path:
    path = Path(path)
    try:
        path.write_text(format_lp(model), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write LP file {path}: {exc}") from exc
    return path


def _parse_number(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def _parse_expr(tokens: List[str]) -> List[Tuple[object, str]]:
    terms = []
    idx = 0
    while idx < len(tokens):
        sign = 1
        if tokens[idx] in "+-":
            sign = -1 if tokens[idx] == "-" else 1
            idx += 1
        coef = 1
        try:
            coef = _parse_number(tokens[idx])
            idx += 1
        except ValueError:
            pass
        terms.append((sign * coef, tokens[idx]))
        idx += 1
    return terms


def parse_lp(text: str) -> MilpModel:
    """Read the subset of CPLEX-LP written by :func:`format_lp`."""
    model = MilpModel()
    header = text.splitlines()[0] if text else ""
    m = re.search(r"export: (.*) objective=(\S+) bigM=(\d+)", header)
    if m:
        model.title, model.objective_mode, model.big_M = m.group(1), m.group(2), int(m.group(3))

    sections: Dict[str, List[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in ("minimize", "subject to", "bounds", "general", "binaries", "end"):
            current = key
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ValueError(f"content outside a section: {raw!r}")
        sections[current].append(line)

    def statements(lines):
        out: List[Tuple[str, str]] = []
        for line in lines:
            hit = _ROW_START.match(line)
            if hit and not line.strip().startswith(("+", "-")):
                out.append((hit.group(1), hit.group(2)))
            elif out:
                out[-1] = (out[-1][0], out[-1][1] + " " + line)
            else:
                raise ValueError(f"continuation without a row: {line!r}")
        return out

    for name, body in statements(sections.get("minimize", [])):
        model.objective = _parse_expr(body.split())

    rows = []
    for name, body in statements(sections.get("subject to", [])):
        tokens = body.split()
        for pos, tok in enumerate(tokens):
            if tok in ("<=", ">=", "="):
                break
        else:
            raise ValueError(f"row {name} has no sense")
        rows.append(Constraint(name, _parse_expr(tokens[:pos]), tok, _parse_number(tokens[pos + 1])))

    continuous = []
    for line in sections.get("bounds", []):
        tokens = line.split()
        if len(tokens) == 3 and tokens[1] == ">=" and float(tokens[2]) == 0:
            continuous.append(tokens[0])
        else:
            raise ValueError(f"unsupported bound {line!r}")
    generals = {tok for line in sections.get("general", []) for tok in line.split()}
    binaries = [tok for line in sections.get("binaries", []) for tok in line.split()]
    for name in continuous:
        model.variables[name] = Variable(name, False, name in generals)
    for name in binaries:
        model.variables[name] = Variable(name, True)
    if sorted(model.variables) != sorted(set(continuous) | set(binaries)):
        raise ValueError("variable declared twice")
    model.constraints = rows
    return model


def read_lp(path) -> MilpModel:
    return parse_lp(Path(path).read_text(encoding="utf-8"))


def read_solution(path) -> Tuple[str, Dict[str, float]]:
    """Parse ``<variable> <value>`` lines; ``# status <word>`` sets the status.

    Lines that do not fit the layout (headers of other solvers' files) are skipped.
    """
    status = "unknown"
    values: Dict[str, float] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) >= 2 and parts[0].lower() == "status":
                status = parts[1].lower()
            continue
        parts = line.split()
        if len(parts) != 2:
            continue
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            continue
    if status == "unknown" and values:
        status = "optimal"
    return status, values


def write_solution(path, status: str, values: Dict[str, float], objective=None) -> None:
    lines = [f"# status {status}"]
    if objective is not None:
        lines.append(f"# objective {objective!r}")
    lines += [f"{name} {value!r}" for name, value in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
