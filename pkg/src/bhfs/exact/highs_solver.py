"""Command-line MILP solve through HiGHS: ``python -m bhfs.exact.highs_solver in.lp out.sol``.

Writes the ``<variable> <value>`` layout read by :func:`bhfs.exact.lpfile.read_solution`.
Needs the optional ``highspy`` package.
"""

from __future__ import annotations

import argparse
import sys

from .lpfile import write_solution


def solve(lp_path: str, sol_path: str, time_limit_s: float | None = None) -> str:
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-9)
    if time_limit_s is not None:
        h.setOptionValue("time_limit", float(time_limit_s))
    h.readModel(lp_path)
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kOptimal:
        word = "optimal"
    elif status == highspy.HighsModelStatus.kInfeasible:
        word = "infeasible"
    elif status == highspy.HighsModelStatus.kTimeLimit:
        word = "timeout"
    else:
        word = h.modelStatusToString(status).replace(" ", "_").lower()
    values = {}
    if word == "optimal":
        lp = h.getLp()
        names = list(lp.col_names_)
        values = dict(zip(names, h.getSolution().col_value))
        write_solution(sol_path, word, values, h.getInfo().objective_function_value)
    else:
        write_solution(sol_path, word, values)
    return word


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("lp")
    parser.add_argument("solution")
    parser.add_argument("--time-limit", type=float, default=None, help="seconds")
    args = parser.parse_args(argv)
    word = solve(args.lp, args.solution, args.time_limit)
    return 0 if word == "optimal" else 1


if __name__ == "__main__":
    sys.exit(main())
