import json
import subprocess
import sys

import pytest

from bhfs.cli import main
from bhfs.core import Instance, table1_instance, write_instance
from bhfs.pareto import read_front, read_metrics


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "t1.txt"
    write_instance(table1_instance(), path)
    return path


def test_generate(tmp_path):
    assert main(["generate", "--out", str(tmp_path / "g"), "--no-calibration"]) == 0
    assert len(list((tmp_path / "g" / "test").glob("*.txt"))) == 54
    assert not (tmp_path / "g" / "calibration").exists()


def test_solve_writes_front_trace_and_perms(tmp_path, inst_file):
    out = tmp_path / "f.csv"
    rc = main(["solve", str(inst_file), "--iter-cap", "5", "--seed", "3", "--out", str(out),
               "--trace", str(tmp_path / "t.jsonl"), "--perms", str(tmp_path / "p.csv")])
    assert rc == 0
    front = read_front(out)
    assert front
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert [json.loads(line)["iteration"] for line in lines] == list(range(6))
    rows = (tmp_path / "p.csv").read_text().splitlines()[1:]
    assert len(rows) == len(front)


@pytest.mark.parametrize("method", ["nsga2", "moig"])
def test_solve_baselines(tmp_path, inst_file, method):
    assert main(["solve", str(inst_file), "--method", method, "--iter-cap", "3",
                 "--out", str(tmp_path / "f.csv")]) == 0


def test_solve_bad_config_returns_error(tmp_path, inst_file):
    assert main(["solve", str(inst_file), "--d", "0", "--iter-cap", "2", "--out", str(tmp_path / "f.csv")]) == 2
    assert main(["solve", str(tmp_path / "missing.txt")]) == 2


def test_experiment_and_report(tmp_path):
    main(["generate", "--out", str(tmp_path / "g"), "--no-calibration"])
    files = [str(p) for p in sorted((tmp_path / "g" / "test").glob("bhfs_n006_g2_*.txt"))]
    res = tmp_path / "res"
    rc = main(["experiment", *files, "--out", str(res), "--methods", "ripg", "moig",
               "--reps", "2", "--iter-cap", "5"])
    assert rc == 0
    assert len(read_metrics(res / "metrics.csv")) == 2 * 2 * 2
    assert json.loads((res / "plan.json").read_text())["replications"] == 2
    assert main(["report", str(res), "--text", str(tmp_path / "r.txt")]) == 0
    assert (res / "report.csv").exists()
    assert "grand" in (tmp_path / "r.txt").read_text()


def test_config_file_supplies_options(tmp_path, inst_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"iter-cap": 2, "seed": 9, "out": str(tmp_path / "cfg.csv")}))
    assert main(["--config", str(cfg), "solve", str(inst_file)]) == 0
    assert (tmp_path / "cfg.csv").exists()
    # command line wins over the file
    assert main(["--config", str(cfg), "solve", str(inst_file), "--out", str(tmp_path / "cli.csv")]) == 0
    assert (tmp_path / "cli.csv").exists()
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "solve", str(inst_file)])


def test_export_milp(tmp_path, inst_file):
    out = tmp_path / "m.lp"
    assert main(["export-milp", str(inst_file), "--objective", "cmax", "--out", str(out)]) == 0
    text = out.read_text()
    assert "Minimize" in text
    assert "General" in text and "Binaries" in text


def test_epsilon_run_without_solver(tmp_path):
    path = tmp_path / "i.txt"
    write_instance(Instance([[2, 5], [2, 2]], [2, 1], [1, 1], [1, 1], [1, 1], id="two"), path)
    work = tmp_path / "w"
    assert main(["epsilon-run", str(path), "--cells", "4", "--workdir", str(work)]) == 0
    assert len(list(work.glob("*.lp"))) == 6
    assert (work / "cells.csv").read_text().count("not_solved") == 6


def test_oracle_and_gantt(tmp_path, capsys):
    path = tmp_path / "i.txt"
    write_instance(Instance([[2, 5], [2, 2], [1, 3]], [2, 1], [1, 1], [1, 1], [1, 1], id="three"), path)
    assert main(["oracle", str(path), "--out", str(tmp_path / "o.csv")]) == 0
    assert read_front(tmp_path / "o.csv")
    assert main(["oracle", str(path), "--mode", "full", "--cap", "10"]) == 2
    capsys.readouterr()
    assert main(["gantt", str(path), "--perm", "2,0,1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# perm 2 0 1")
    assert main(["gantt", str(path), "--neh", "tec", "--out", str(tmp_path / "g.txt")]) == 0
    assert (tmp_path / "g.txt").read_text().startswith("# perm")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bhfs", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "epsilon-run" in proc.stdout
