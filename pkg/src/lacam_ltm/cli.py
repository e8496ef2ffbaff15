"""Command-line entry point: load an instance, solve it, validate, and write reports.

Exit status is 0 for a validated solution, 1 when no valid solution was found
within the limits, and 2 for input or output errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .anytime import ONESHOT, PE, ExecutionTrace, IterationStats, OneShotResult, SolveConfig, solve_oneshot, solve_pe
from .lacam import DEADLINE
from .mapf import Instance, InstanceError, ParseError, load_map, parse_scen, solution_to_paths, sum_of_loss, validate_solution
from .traffic import TrafficMap

SCHEMA_VERSION = "1.0"
EXIT_SOLVED, EXIT_UNSOLVED, EXIT_INPUT = 0, 1, 2

# keys whose values depend on the wall clock; everything else is reproducible
WALL_CLOCK_FIELDS = frozenset({"time_ms", "elapsed_s", "planning_time_s", "started_at", "generations_before_deadline"})

log = logging.getLogger("lacam_ltm")


class UsageError(Exception):
    """Bad flag value or unreadable input; the message names the flag."""


@dataclass
class RunReport:
    instance: dict[str, Any]
    mode: str
    params: dict[str, Any]
    seed: int
    events: list[dict[str, Any]] = field(default_factory=list)
    result: dict[str, Any] = field(default_factory=dict)
    iterations: list[dict[str, Any]] = field(default_factory=list)
    windows: list[dict[str, Any]] = field(default_factory=list)
    solution: list[list[list[int]]] | None = None
    ltm_dump: str | None = None
    elapsed_s: float = 0.0
    started_at: float = 0.0
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "instance": self.instance,
            "mode": self.mode,
            "params": self.params,
            "seed": self.seed,
            "events": self.events,
            "result": self.result,
            "iterations": self.iterations,
            "windows": self.windows,
            "solution": self.solution,
            "ltm_dump": self.ltm_dump,
            "elapsed_s": self.elapsed_s,
            "started_at": self.started_at,
        }


def strip_wall_clock(obj: Any) -> Any:
    """Copy of a report dict without wall-clock fields, for reproducibility checks."""
    if isinstance(obj, dict):
        return {k: strip_wall_clock(v) for k, v in obj.items() if k not in WALL_CLOCK_FIELDS}
    if isinstance(obj, list):
        return [strip_wall_clock(v) for v in obj]
    return obj


def schema() -> dict[str, Any]:
    return json.loads((Path(__file__).with_name("report.schema.json")).read_text(encoding="utf-8"))


def _positive_int(flag: str):
    def conv(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be at least 1, got {value}")
        return value

    return conv


def _float(flag: str, positive: bool = False):
    def conv(text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        if not math.isfinite(value) or value < 0 or (positive and value == 0):
            bound = "positive" if positive else "non-negative"
            raise argparse.ArgumentTypeError(f"{flag} must be a finite {bound} number, got {text}")
        return value

    return conv


def _seed(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed expects an integer, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # raise instead of exiting so run_cli owns exit codes
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lacam-ltm", description="Anytime MAPF with LaCAM* and a lightweight traffic map.")
    p.add_argument("--map", required=True, help="MovingAI .map file")
    p.add_argument("--scen", required=True, help="MovingAI .scen file")
    p.add_argument("--agents", required=True, type=_positive_int("--agents"), help="number of agents to load")
    p.add_argument("--mode", required=True, choices=[ONESHOT, PE])
    p.add_argument("--time-limit", type=_float("--time-limit", positive=True), default=30.0, help="one-shot limit in seconds")
    p.add_argument("--exec-time", type=_float("--exec-time", positive=True), default=0.1, help="seconds per executed action (PE)")
    p.add_argument("--commit", type=_positive_int("--commit"), default=5, help="actions committed per window (PE)")
    p.add_argument("--budget-factor", type=_positive_int("--budget-factor"), default=10)
    p.add_argument("--w-lb", type=_float("--w-lb"), default=0.0)
    p.add_argument("--w-ub", type=_float("--w-ub"), default=10.0)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--disable-ltm", action="store_true", help="plain LaCAM* baseline")
    p.add_argument("--max-iterations", type=_positive_int("--max-iterations"), default=None,
                   help="stop the anytime loop (per window in PE) after this many runs")
    p.add_argument("--wall-cap", type=_float("--wall-cap", positive=True), default=600.0,
                   help="PE failure guard in seconds")
    p.add_argument("--output", help="JSON report path")
    p.add_argument("--coverage", help="coverage CSV path")
    p.add_argument("--dump-ltm", help="traffic map CSV path")
    p.add_argument("--paths", help="per-agent paths file")
    return p


def _configure_logging() -> None:
    level_name = os.environ.get("LTM_LOG", "off").strip().lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO, "off": None, "": None}
    if level_name not in levels:
        raise UsageError(f"LTM_LOG must be one of debug, info, off; got {level_name!r}")
    level = levels[level_name]
    for h in list(log.handlers):
        if getattr(h, "_lacam_cli", False):
            log.removeHandler(h)
    if level is None:
        log.setLevel(logging.WARNING)
        return
    handler = logging.StreamHandler(sys.stderr)
    handler._lacam_cli = True  # type: ignore[attr-defined]
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(level)


def _load(args: argparse.Namespace) -> Instance:
    for flag, path in (("--map", args.map), ("--scen", args.scen)):
        if not Path(path).is_file():
            raise UsageError(f"{flag}: file not found: {path}")
    try:
        grid = load_map(args.map)
    except ParseError as e:
        raise UsageError(f"--map: {args.map}: {e}") from None
    try:
        with open(args.scen, encoding="utf-8") as fh:
            return parse_scen(fh, args.agents, grid, name=Path(args.scen).name)
    except ParseError as e:
        raise UsageError(f"--scen: {args.scen}: {e}") from None
    except InstanceError as e:
        raise UsageError(f"--scen: {e}") from None


def _iteration_dict(s: IterationStats) -> dict[str, Any]:
    d = {"iteration": s.iteration, "budget": s.budget, "reason": s.reason, "generations": s.generations, "sol": s.sol}
    if s.reason == DEADLINE:
        # how far a run got before the clock stopped it is a timing measurement
        d["generations"] = None
        d["generations_before_deadline"] = s.generations
    return d


def _ratio(sol: int, lb: int) -> float:
    return float(Fraction(sol, lb)) if lb > 0 else 1.0


def _build_report(args: argparse.Namespace, instance: Instance, outcome: OneShotResult | ExecutionTrace, started: float) -> RunReport:
    cfg_params = {
        "time_limit": args.time_limit,
        "exec_time": args.exec_time,
        "commit": args.commit,
        "budget_factor": args.budget_factor,
        "w_lb": args.w_lb,
        "w_ub": args.w_ub,
        "use_ltm": not args.disable_ltm,
        "max_iterations": args.max_iterations,
    }
    report = RunReport(
        instance={"map": Path(args.map).name, "scen": Path(args.scen).name, "agents": instance.n},
        mode=args.mode,
        params=cfg_params,
        seed=args.seed,
        started_at=started,
    )
    lb = sum(t[s] for t, s in zip(instance.dist_tables, instance.starts))
    report.events = [
        {"time_ms": round(e.time * 1000.0, 3), "sol": e.sol, "sol_ratio": _ratio(e.sol, lb), "iteration": e.iteration}
        for e in outcome.events
    ]
    if isinstance(outcome, OneShotResult):
        solution = outcome.solution
        status = "solved" if solution is not None else "unsolved"
        report.iterations = [_iteration_dict(s) for s in outcome.iterations]
    else:
        solution = outcome.steps if outcome.solved else None
        status = outcome.status
        report.windows = [
            {
                "index": w.index,
                "committed": w.committed,
                "sol_from_current": w.sol_from_current,
                "prefix_hash": w.prefix_hash,
                "planning_time_s": round(w.planning_time, 6),
                "iterations": [_iteration_dict(s) for s in w.iterations],
            }
            for w in outcome.windows
        ]
    result: dict[str, Any] = {"status": status, "valid": False, "sol": None, "sol_lower_bound": lb,
                              "sol_ratio": None, "makespan": None}
    if solution is not None:
        verdict = validate_solution(instance, solution)
        result["valid"] = verdict.ok
        if verdict.ok:
            result.update(sum_of_loss(instance, solution).as_dict())
        else:
            result["status"] = "invalid"
            result["error"] = verdict.message
        report.solution = [[list(c) for c in path] for path in solution_to_paths(instance.grid, solution)]
    report.result = result
    report.elapsed_s = round(outcome.elapsed, 6)
    return report


def emit_reports(report: RunReport, targets: dict[str, str | None], ltm: TrafficMap | None = None) -> list[Path]:
    """Write the requested artifacts; keys of ``targets`` are output, coverage, dump_ltm and paths."""
    written: list[Path] = []
    if targets.get("dump_ltm") and ltm is not None:
        path = Path(targets["dump_ltm"])
        ltm.dump_csv(path)
        report.ltm_dump = str(path)
        written.append(path)
    if targets.get("coverage"):
        path = Path(targets["coverage"])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time_ms", "best_sol", "sol_ratio"])
            for e in report.events:
                writer.writerow([f"{e['time_ms']:.3f}", e["sol"], f"{e['sol_ratio']:.9f}"])
        written.append(path)
    if targets.get("paths") and report.solution is not None:
        path = Path(targets["paths"])
        paths = report.solution
        text = "".join(",".join(f"({x},{y})" for x, y in p) + "\n" for p in paths)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    if targets.get("output"):
        path = Path(targets["output"])
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        written.append(path)
    return written


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Parse flags, solve, validate, write artifacts; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        if args.w_ub <= args.w_lb:
            raise UsageError(f"--w-ub must exceed --w-lb ({args.w_ub} <= {args.w_lb})")
        _configure_logging()
        instance = _load(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    cfg = SolveConfig(
        mode=args.mode,
        time_limit=args.time_limit,
        exec_time=args.exec_time,
        commit=args.commit,
        budget_factor=args.budget_factor,
        w_lb=args.w_lb,
        w_ub=args.w_ub,
        seed=args.seed,
        use_ltm=not args.disable_ltm,
        max_iterations=args.max_iterations,
        wall_cap=args.wall_cap,
    )
    started = time.time()
    log.info("solving %s with %d agents in %s mode", instance.name, instance.n, args.mode)
    outcome = solve_oneshot(instance, cfg) if args.mode == ONESHOT else solve_pe(instance, cfg)
    report = _build_report(args, instance, outcome, started)
    targets = {"output": args.output, "coverage": args.coverage, "dump_ltm": args.dump_ltm, "paths": args.paths}
    try:
        emit_reports(report, targets, outcome.ltm)
    except OSError as e:
        print(f"error: cannot write {e.filename}: {e.strerror}", file=sys.stderr)
        return EXIT_INPUT
    r = report.result
    if r["valid"]:
        print(f"solved: sol={r['sol']} ratio={r['sol_ratio']:.4f} makespan={r['makespan']}")
        return EXIT_SOLVED
    print(f"unsolved: status={r['status']}")
    return EXIT_UNSOLVED


def main() -> None:
    sys.exit(run_cli())
