from __future__ import annotations

import csv
import json
from fractions import Fraction

import jsonschema
import pytest

from lacam_ltm import load_instance, sum_of_loss, validate_solution
from lacam_ltm.benchmarks import random_grid, random_instance, write_benchmark
from lacam_ltm.cli import run_cli, schema, strip_wall_clock
from lacam_ltm.mapf import parse_paths


def args(m, s, *extra):
    return ["--map", str(m), "--scen", str(s), "--agents", "1", "--mode", "oneshot", *extra]


def test_corridor_report(corridor_files, tmp_path, capsys):
    m, s = corridor_files
    out, cov, paths, ltm = (tmp_path / n for n in ("r.json", "c.csv", "p.txt", "l.csv"))
    code = run_cli(args(m, s, "--time-limit", "5", "--output", str(out), "--coverage", str(cov),
                        "--paths", str(paths), "--dump-ltm", str(ltm)))
    assert code == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, schema())
    assert report["result"]["sol"] == 2 and report["result"]["valid"]
    assert report["ltm_dump"] == str(ltm)
    rows = list(csv.reader(cov.open()))
    assert rows[0] == ["time_ms", "best_sol", "sol_ratio"] and len(rows) == 1 + len(report["events"])
    inst = load_instance(m, s, 1)
    sol = parse_paths(inst.grid, paths.read_text())
    assert validate_solution(inst, sol).ok
    assert "solved: sol=2" in capsys.readouterr().out


def test_ratio_recomputed_from_embedded_solution(tmp_path):
    g = random_grid(10, 10, 20, seed=1)
    inst = random_instance(g, 12, seed=2)
    m, s = write_benchmark(inst, tmp_path, "r")
    out = tmp_path / "r.json"
    assert run_cli(["--map", str(m), "--scen", str(s), "--agents", "12", "--mode", "oneshot",
                    "--time-limit", "1", "--output", str(out)]) == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, schema())
    sol = [tuple(inst.grid.vertex(*path[t]) for path in report["solution"]) for t in range(len(report["solution"][0]))]
    metrics = sum_of_loss(inst, sol)
    assert float(Fraction(metrics.sol, metrics.sol_lower_bound)) == report["result"]["sol_ratio"]
    bests = [e["sol"] for e in report["events"]]
    times = [e["time_ms"] for e in report["events"]]
    assert all(b < a for a, b in zip(bests, bests[1:]))
    assert all(b > a for a, b in zip(times, times[1:]))


def test_pe_mode(corridor_files, tmp_path):
    m, s = corridor_files
    out = tmp_path / "pe.json"
    cmd = ["--map", str(m), "--scen", str(s), "--agents", "1", "--mode", "pe", "--output", str(out)]
    assert run_cli(cmd) == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, schema())
    assert report["mode"] == "pe" and report["result"]["sol"] == 2
    assert report["windows"][0]["committed"] == "plan"


@pytest.mark.parametrize(
    "extra,flag",
    [
        (["--agents", "0"], "--agents"),
        (["--time-limit", "-1"], "--time-limit"),
        (["--commit", "0"], "--commit"),
        (["--exec-time", "abc"], "--exec-time"),
        (["--budget-factor", "0"], "--budget-factor"),
        (["--w-lb", "5", "--w-ub", "2"], "--w-ub"),
        (["--seed", "x"], "--seed"),
    ],
)
def test_bad_flags_exit_2_naming_flag(corridor_files, capsys, extra, flag):
    m, s = corridor_files
    assert run_cli(args(m, s, *extra)) == 2
    assert flag in capsys.readouterr().err


def test_missing_file(corridor_files, tmp_path, capsys):
    _, s = corridor_files
    missing = tmp_path / "nope.map"
    assert run_cli(args(missing, s)) == 2
    err = capsys.readouterr().err
    assert "--map" in err and str(missing) in err


def test_too_many_agents(corridor_files, capsys):
    m, s = corridor_files
    assert run_cli(["--map", str(m), "--scen", str(s), "--agents", "2", "--mode", "oneshot"]) == 2
    assert "--scen" in capsys.readouterr().err


def test_unwritable_output(corridor_files, tmp_path):
    m, s = corridor_files
    assert run_cli(args(m, s, "--output", str(tmp_path / "no" / "dir" / "r.json"))) == 2


def test_unsolved_exit_1(tmp_path):
    # two agents must swap on a bare corridor: no solution exists, and PE gives up at the wall cap
    (tmp_path / "x.map").write_text("type octile\nheight 1\nwidth 2\nmap\n..\n")
    (tmp_path / "x.scen").write_text("version 1\n0\tx.map\t2\t1\t0\t0\t1\t0\t1\n0\tx.map\t2\t1\t1\t0\t0\t0\t1\n")
    base = ["--map", str(tmp_path / "x.map"), "--scen", str(tmp_path / "x.scen"), "--agents", "2"]
    assert run_cli(base + ["--mode", "oneshot", "--time-limit", "1"]) == 1
    assert run_cli(base + ["--mode", "pe", "--exec-time", "0.01", "--wall-cap", "0.5"]) == 1


def test_all_at_goal_paths_have_one_coordinate(tmp_path):
    (tmp_path / "g.map").write_text("type octile\nheight 1\nwidth 3\nmap\n...\n")
    (tmp_path / "g.scen").write_text("version 1\n0\tg.map\t3\t1\t0\t0\t0\t0\t0\n0\tg.map\t3\t1\t2\t0\t2\t0\t0\n")
    paths = tmp_path / "p.txt"
    ltm = tmp_path / "l.csv"
    assert run_cli(["--map", str(tmp_path / "g.map"), "--scen", str(tmp_path / "g.scen"), "--agents", "2",
                    "--mode", "oneshot", "--paths", str(paths), "--dump-ltm", str(ltm), "--w-lb", "0.5"]) == 0
    assert paths.read_text().splitlines() == ["(0,0)", "(2,0)"]
    rows = list(csv.DictReader(ltm.open()))
    assert rows and all(float(r["penalty"]) == 0.5 for r in rows)


def test_reports_reproducible(tmp_path):
    g = random_grid(10, 10, 20, seed=3)
    inst = random_instance(g, 15, seed=3)
    m, s = write_benchmark(inst, tmp_path, "d")
    reports = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        run_cli(["--map", str(m), "--scen", str(s), "--agents", "15", "--mode", "oneshot", "--seed", "7",
                 "--max-iterations", "5", "--output", str(out)])
        reports.append(strip_wall_clock(json.loads(out.read_text())))
    assert reports[0] == reports[1]


def test_log_env(corridor_files, monkeypatch, capsys):
    m, s = corridor_files
    monkeypatch.setenv("LTM_LOG", "info")
    assert run_cli(args(m, s)) == 0
    assert "INFO" in capsys.readouterr().err
    monkeypatch.setenv("LTM_LOG", "loud")
    assert run_cli(args(m, s)) == 2
    assert "LTM_LOG" in capsys.readouterr().err
