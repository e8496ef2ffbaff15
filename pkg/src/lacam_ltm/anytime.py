"""Anytime loop around bounded LaCAM* runs, for one-shot and planning-and-execution MAPF."""

from __future__ import annotations

import hashlib
import logging
import operator
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

from .lacam import DEADLINE, EXHAUSTED, PRUNED, HighLevelNode, SearchTree, lacam_run
from .mapf import Config, Instance, Metrics, Solution, sum_of_loss
from .pibt import PIBT
from .traffic import IntegrityError, TrafficDistances, TrafficMap

log = logging.getLogger(__name__)

ONESHOT = "oneshot"
PE = "pe"


@dataclass
class SolveConfig:
    """Solver parameters.

    ``first_window_budget`` caps the generations spent in the first planning
    window (a test hook for starving it). ``max_iterations`` stops the anytime
    loop early, independent of the clock.
    """

    mode: str = ONESHOT
    time_limit: float = 30.0
    exec_time: float = 0.1
    commit: int = 5
    budget_factor: int = 10
    w_lb: float = 0.0
    w_ub: float = 10.0
    seed: int = 0
    use_ltm: bool = True
    swap: bool = True
    restart: str = "root"
    max_iterations: int | None = None
    wall_cap: float = 600.0
    first_window_budget: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in (ONESHOT, PE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == ONESHOT and not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if self.mode == PE and (not self.exec_time > 0 or self.commit < 1):
            raise ValueError("execution time must be positive and commitment horizon at least 1")
        if self.budget_factor < 1:
            raise ValueError("budget factor must be at least 1")
        if not 0 <= self.w_lb < self.w_ub:
            raise ValueError("penalty bounds must satisfy 0 <= w_lb < w_ub")
        if self.restart not in ("root", "path"):
            raise ValueError(f"unknown restart strategy {self.restart!r}")


@dataclass
class AnytimeEvent:
    time: float
    sol: int
    iteration: int


@dataclass
class IterationStats:
    iteration: int
    budget: int | None
    reason: str
    generations: int
    sol: int | None
    restart_depth: int | None = None


@dataclass
class OneShotResult:
    solution: Solution | None
    events: list[AnytimeEvent]
    iterations: list[IterationStats]
    first_solution: Solution | None
    ltm: TrafficMap
    tree: SearchTree
    elapsed: float
    exhausted: bool = False

    @property
    def solved(self) -> bool:
        return self.solution is not None

    def metrics(self, instance: Instance) -> Metrics | None:
        return sum_of_loss(instance, self.solution) if self.solution is not None else None


class Solver:
    """Shared state of one solve: traffic map, distances, search tree, generator and rng."""

    def __init__(self, instance: Instance, cfg: SolveConfig, keep_history: bool):
        self.instance = instance
        self.cfg = cfg
        self.ltm = TrafficMap(instance.grid, cfg.w_lb, cfg.w_ub)
        self.distances = TrafficDistances(self.ltm, instance.goals)
        self.tree = SearchTree(instance, self.distances, keep_history=keep_history)
        self.pibt = PIBT(instance, self.distances, swap=cfg.swap)
        self.rng = random.Random(cfg.seed)

    def update_ltm(self, records) -> None:
        if self.cfg.use_ltm and records:
            self.ltm.apply_history(records)


def select_restart_node(
    tree: SearchTree,
    mode: str,
    current: Config | HighLevelNode | None = None,
    strategy: str = "root",
    rng: random.Random | None = None,
) -> HighLevelNode:
    """Restart node for the next run.

    One-shot restarts at the root (``strategy="path"`` instead picks a random
    node on the incumbent's path). Planning-and-execution restarts at the node
    holding the agents' current committed configuration.
    """
    if not tree.explored:
        raise IntegrityError("empty search tree")
    if mode == PE:
        config = current.config if isinstance(current, HighLevelNode) else current
        node = tree.explored.get(tuple(config)) if config is not None else None
        if node is None:
            raise IntegrityError("current configuration is not in the search tree")
        return node
    if strategy == "path" and tree.goal_node is not None:
        path: list[HighLevelNode] = []
        n = tree.goal_node.parent
        while n is not None:
            path.append(n)
            n = n.parent
        if path:
            return (rng or random.Random(0)).choice(path)
    return tree.root


def solve_oneshot(instance: Instance, cfg: SolveConfig) -> OneShotResult:
    """Run the anytime loop until the time limit (or proven optimality)."""
    t0 = time.perf_counter()
    deadline = t0 + cfg.time_limit
    solver = Solver(instance, cfg, keep_history=False)
    tree = solver.tree
    best: Solution | None = None
    best_cost: int | None = None
    first: Solution | None = None
    events: list[AnytimeEvent] = []
    stats: list[IterationStats] = []
    exhausted = False
    iteration = 0
    while time.perf_counter() < deadline:
        if cfg.max_iterations is not None and iteration >= cfg.max_iterations:
            break
        iteration += 1
        if iteration == 1 or cfg.use_ltm:
            restart = select_restart_node(tree, ONESHOT, strategy=cfg.restart, rng=solver.rng)
            if restart is tree.root:
                tree.refresh_root_priorities()
        else:
            restart = None
        if iteration == 1 or not cfg.use_ltm or best is None:
            budget = None
        else:
            budget = cfg.budget_factor * max(1, len(best) - 1)
        res = lacam_run(
            tree,
            solver.pibt,
            restart,
            budget=budget,
            best_sol_cost=best_cost,
            deadline=deadline,
            rng=solver.rng,
            plain=not cfg.use_ltm,
        )
        if res.solution is not None and (best_cost is None or res.cost < best_cost):
            best, best_cost = res.solution, res.cost
            if first is None:
                first = best
            events.append(AnytimeEvent(time.perf_counter() - t0, best_cost, iteration))
            log.info("iteration %d: sol %d (%s)", iteration, best_cost, res.reason)
        stats.append(IterationStats(iteration, budget, res.reason, res.generations, res.cost, getattr(restart, "depth", None)))
        solver.update_ltm(res.records)
        if best_cost == 0 or res.reason == EXHAUSTED and (restart is tree.root or restart is None):
            exhausted = True
            break
        if res.reason == PRUNED and res.generations == 0 and restart is tree.root:
            # the root itself cannot beat the incumbent: it is optimal
            exhausted = True
            break
    return OneShotResult(best, events, stats, first, solver.ltm, tree, time.perf_counter() - t0, exhausted)


@dataclass
class WindowStats:
    index: int
    committed: str  # "plan" or "wait"
    iterations: list[IterationStats]
    sol_from_current: int | None
    prefix_hash: str
    planning_time: float = 0.0


@dataclass
class ExecutionTrace:
    """Committed configurations (append-only) and per-window statistics."""

    steps: list[Config]
    windows: list[WindowStats] = field(default_factory=list)
    status: str = "running"
    events: list[AnytimeEvent] = field(default_factory=list)
    metrics: Metrics | None = None
    ltm: TrafficMap | None = None
    tree: SearchTree | None = None
    elapsed: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def prefix_hash(self, length: int | None = None) -> str:
        return hash_steps(self.steps[: len(self.steps) if length is None else length])


def hash_steps(steps: Sequence[Sequence[int]]) -> str:
    h = hashlib.sha256()
    for q in steps:
        h.update(",".join(map(str, q)).encode())
        h.update(b";")
    return h.hexdigest()


def solve_pe(instance: Instance, cfg: SolveConfig) -> ExecutionTrace:
    """Planning and execution: plan for ``exec_time * commit`` seconds, then commit ``commit`` actions."""
    t0 = time.perf_counter()
    solver = Solver(instance, cfg, keep_history=True)
    tree = solver.tree
    goals = instance.goals
    X = cfg.commit
    trace = ExecutionTrace(steps=[instance.starts], ltm=solver.ltm, tree=tree)
    current = tree.root
    paused = False  # a run without any solution is waiting to be resumed
    window = 0
    committed_loss = 0  # sum-of-loss of the executed prefix
    while current.config != goals:
        if time.perf_counter() - t0 > cfg.wall_cap:
            trace.status = "failed"
            break
        w_start = time.perf_counter()
        w_deadline = w_start + cfg.exec_time * X
        starved = window == 0 and cfg.first_window_budget is not None
        iterations: list[IterationStats] = []
        it = 0
        while time.perf_counter() < w_deadline:
            if cfg.max_iterations is not None and it >= cfg.max_iterations:
                break
            it += 1
            goal = tree.goal_node
            best_cost = goal.g if goal is not None else None
            if not cfg.use_ltm:
                restart = None if tree.open else current
                budget = None
            elif goal is None:
                restart = None if paused else current
                budget = None
            else:
                restart = select_restart_node(tree, PE, current.config)
                budget = cfg.budget_factor * max(1, len(_plan_from(goal, current)) - 1)
            if starved:
                budget = cfg.first_window_budget
            res = lacam_run(
                tree,
                solver.pibt,
                restart,
                budget=budget,
                best_sol_cost=best_cost,
                deadline=w_deadline,
                rng=solver.rng,
                plain=not cfg.use_ltm,
            )
            solver.update_ltm(res.records)
            iterations.append(IterationStats(it, budget, res.reason, res.generations, res.cost))
            if res.solution is not None:
                paused = False
                projected = committed_loss + tree.goal_node.g - current.g
                if not trace.events or projected < trace.events[-1].sol:
                    trace.events.append(AnytimeEvent(time.perf_counter() - t0, projected, it))
            elif tree.goal_node is None:
                paused = res.reason != EXHAUSTED
            if starved or res.reason in (DEADLINE, EXHAUSTED):
                break
            if res.reason == PRUNED and res.generations == 0 and restart is current:
                break  # the plan from the current node is already optimal
        if tree.goal_node is None and not paused and iterations and iterations[-1].reason == EXHAUSTED:
            trace.status = "unsolvable"
            break
        goal = tree.goal_node
        if goal is not None:
            plan = _plan_from(goal, current)
            nodes = plan[1 : X + 1]
            committed = [n.config for n in nodes]
            committed += [goals] * (X - len(committed))
            new_current = nodes[-1] if nodes else current
            kind = "plan"
            sol_here = goal.g - current.g
        else:
            committed = [current.config] * X
            new_current = current
            kind = "wait"
            sol_here = None
        for q in trace.steps[-1:] + committed[:-1]:
            committed_loss += sum(map(operator.ne, q, goals))
        trace.steps.extend(committed)
        trace.windows.append(
            WindowStats(window, kind, iterations, sol_here, trace.prefix_hash(), time.perf_counter() - w_start)
        )
        if new_current is not current:
            removed = tree.reroot(new_current)
            stale = [r for node in removed for r in node.records]
            if stale:
                solver.ltm.remove_history(stale)
            current = new_current
        window += 1
    if current.config == goals:
        trace.status = "solved"
        trace.metrics = sum_of_loss(instance, trace.steps)
    trace.elapsed = time.perf_counter() - t0
    return trace


def _plan_from(goal: HighLevelNode, current: HighLevelNode) -> list[HighLevelNode]:
    nodes = []
    n = goal
    while n is not None and n is not current:
        nodes.append(n)
        n = n.parent
    if n is not current:
        raise IntegrityError("best plan does not pass through the current configuration")
    nodes.append(current)
    nodes.reverse()
    return nodes

