"""Bounded LaCAM* runs over a persistent search tree.

A run pops nodes depth-first, asks each node's lazily grown constraint tree for
the next "who is where" pin, and lets PIBT produce one successor per pin. It
stops at the first goal, at a cheaper rediscovered goal path, when the node
budget is spent, when a popped node cannot beat the incumbent, or at the
deadline.
"""

from __future__ import annotations

import heapq
import operator
import random
import time
from collections import deque
from dataclasses import dataclass, field
from itertools import count
from typing import Sequence

import numpy as np

from .mapf import Config, Instance, Solution
from .pibt import PIBT, NO_CONSTRAINT, Distances, PositionConstraint, inherit_priorities, priority_order, root_priorities
from .traffic import HistoryRecord, IntegrityError

# termination reasons
GOAL = "goal"
IMPROVED = "improved"
BOUND = "bound"
PRUNED = "pruned"
DEADLINE = "deadline"
EXHAUSTED = "exhausted"


def edge_cost(goals: Sequence[int], q_from: Sequence[int], q_to: Sequence[int] | None = None) -> int:
    """Agents not at their goal in ``q_from``; summed along a plan this is its sum-of-loss."""
    return sum(map(operator.ne, q_from, goals))


class HighLevelNode:
    __slots__ = (
        "id",
        "config",
        "g",
        "h",
        "parent",
        "neighbors",
        "priorities",
        "_order",
        "constraints",
        "constraint_order",
        "records",
        "depth",
    )

    def __init__(self, node_id: int, config: Config, g: int, h: int, parent: HighLevelNode | None, priorities: np.ndarray):
        self.id = node_id
        self.config = config
        self.g = g
        self.h = h
        self.parent = parent
        self.neighbors: dict[int, HighLevelNode] = {}
        self.priorities = priorities
        self._order: list[int] | None = None
        self.constraints: deque[PositionConstraint] | None = None
        self.constraint_order: list[int] | None = None
        self.records: list[HistoryRecord] = []
        self.depth = 0 if parent is None else parent.depth + 1

    @property
    def order(self) -> list[int]:
        if self._order is None:
            self._order = priority_order(self.priorities)
        return self._order

    def set_priorities(self, priorities: np.ndarray) -> None:
        self.priorities = priorities
        self._order = None

    @property
    def f(self) -> int:
        return self.g + self.h

    def __repr__(self) -> str:
        return f"HighLevelNode(id={self.id}, g={self.g}, h={self.h}, depth={self.depth})"


class SearchTree:
    """Explored configurations, the depth-first open stack and generation counters."""

    def __init__(self, instance: Instance, distances: Distances, root_config: Config | None = None, keep_history: bool = True):
        self.instance = instance
        self.goals = instance.goals
        self._goals_arr = np.array(instance.goals, dtype=np.int64)
        self._tables = instance.dist_tables
        self.distances = distances
        self.keep_history = keep_history
        self._ids = count()
        self.explored: dict[Config, HighLevelNode] = {}
        self.hl_generations = 0
        self.ll_generations = 0
        config = tuple(root_config) if root_config is not None else instance.starts
        self.root = self._new_node(config, None, root_priorities(distances, config))
        self.open: list[HighLevelNode] = [self.root]
        self.goal_node: HighLevelNode | None = self.root if config == self.goals else None

    def heuristic(self, config: Config) -> int:
        return sum(table[v] for table, v in zip(self._tables, config))

    def _new_node(self, config: Config, parent: HighLevelNode | None, priorities: np.ndarray) -> HighLevelNode:
        g = 0 if parent is None else parent.g + edge_cost(self.goals, parent.config)
        node = HighLevelNode(next(self._ids), config, g, self.heuristic(config), parent, priorities)
        self.explored[config] = node
        self.hl_generations += 1
        return node

    def create_child(self, parent: HighLevelNode, config: Config) -> HighLevelNode:
        node = self._new_node(config, parent, inherit_priorities(parent.priorities, config, self._goals_arr))
        parent.neighbors[node.id] = node
        if config == self.goals and self.goal_node is None:
            self.goal_node = node
        return node

    def refresh_root_priorities(self) -> None:
        self.root.set_priorities(root_priorities(self.distances, self.root.config))

    def __contains__(self, node: HighLevelNode) -> bool:
        return self.explored.get(node.config) is node

    def __len__(self) -> int:
        return len(self.explored)

    def subtree(self, node: HighLevelNode) -> list[HighLevelNode]:
        """Nodes whose parent chain passes through ``node`` (``node`` included)."""
        children: dict[int, list[HighLevelNode]] = {}
        for other in self.explored.values():
            if other.parent is not None:
                children.setdefault(other.parent.id, []).append(other)
        out = [node]
        stack = [node]
        while stack:
            for child in children.get(stack.pop().id, ()):
                out.append(child)
                stack.append(child)
        return out

    def reroot(self, node: HighLevelNode) -> list[HighLevelNode]:
        """Keep only the subtree under ``node``; returns the discarded nodes."""
        if node not in self:
            raise IntegrityError("new root is not part of the search tree")
        keep = self.subtree(node)
        keep_ids = {k.id for k in keep}
        removed = [k for k in self.explored.values() if k.id not in keep_ids]
        self.explored = {k.config: k for k in keep}
        for k in keep:
            k.neighbors = {i: m for i, m in k.neighbors.items() if i in keep_ids}
        node.parent = None
        self.root = node
        self.open = [k for k in self.open if k.id in keep_ids]
        if self.goal_node is not None and self.goal_node.id not in keep_ids:
            self.goal_node = None
        return removed

    def records(self) -> list[HistoryRecord]:
        return [r for node in self.explored.values() for r in node.records]


def extract_plan(node: HighLevelNode) -> Solution:
    plan = []
    while node is not None:
        plan.append(node.config)
        node = node.parent
    plan.reverse()
    return plan


def next_constraint(tree: SearchTree, node: HighLevelNode) -> PositionConstraint | None:
    """Next pin from the node's breadth-first constraint tree, ``None`` once exhausted.

    The first call yields the empty constraint. Children of a constraint of
    depth ``k`` pin the ``k``-th agent of the node's priority order (frozen at
    the first extension) to each of its candidates, best evaluation first.
    """
    if node.constraints is None:
        node.constraints = deque([NO_CONSTRAINT])
    if not node.constraints:
        return None
    c = node.constraints.popleft()
    n = len(node.config)
    if c.depth < n:
        if node.constraint_order is None:
            node.constraint_order = list(node.order)
        i = node.constraint_order[c.depth]
        v = node.config[i]
        neighbors = tree.instance.grid.neighbors[v]
        dist = tree.distances.get
        cands = sorted(neighbors + [v], key=lambda u: (dist(i, u), u))
        node.constraints.extend(c.extend(i, u) for u in cands)
    tree.ll_generations += 1
    return c


def relax_g(tree: SearchTree, node: HighLevelNode, candidate_parent: HighLevelNode) -> bool:
    """Link ``candidate_parent -> node`` and propagate any cost decrease.

    Returns whether the goal node's cost decreased.
    """
    candidate_parent.neighbors[node.id] = node
    goals = tree.goals
    g = candidate_parent.g + edge_cost(goals, candidate_parent.config)
    if g >= node.g:
        return False
    goal = tree.goal_node
    old_goal_g = goal.g if goal is not None else None
    node.g = g
    node.parent = candidate_parent
    heap = [(node.g, node.id, node)]
    while heap:
        g_u, _, u = heapq.heappop(heap)
        if g_u > u.g:
            continue
        step = u.g + edge_cost(goals, u.config)
        for w in u.neighbors.values():
            if step < w.g:
                w.g = step
                w.parent = u
                heapq.heappush(heap, (w.g, w.id, w))
    return goal is not None and goal.g < old_goal_g


@dataclass
class RunResult:
    solution: Solution | None
    records: list[HistoryRecord]
    reason: str
    generations: int
    cost: int | None = None
    nodes: int = 0
    pibt_calls: int = 0
    pibt_failures: int = 0
    stats: dict = field(default_factory=dict)


def lacam_run(
    tree: SearchTree,
    pibt: PIBT,
    restart: HighLevelNode | None,
    budget: int | None = None,
    best_sol_cost: int | None = None,
    deadline: float | None = None,
    rng: random.Random | None = None,
    plain: bool = False,
) -> RunResult:
    """One bounded LaCAM* run.

    Args:
        restart: Node to restart from (the open stack is reset to it), or
            ``None`` to resume the paused stack.
        budget: Cap on high-level node plus constraint generations.
        best_sol_cost: Incumbent cost; a popped node with ``g + h`` at or above
            it ends the run.
        deadline: ``time.perf_counter()`` value at which to stop.
        plain: Classic LaCAM* behaviour: dominated nodes are skipped instead of
            ending the run, and exhausted nodes are simply dropped.
    """
    if rng is None:
        rng = random.Random(0)
    if restart is not None:
        if restart not in tree:
            raise IntegrityError("restart node is not part of the search tree")
        tree.open = [restart]
    goals = tree.goals
    open_ = tree.open
    records: list[HistoryRecord] = []
    gens = 0
    calls = failures = 0
    visited: dict[int, int] = {}
    nodes_before = len(tree)

    def finish(reason: str, goal: HighLevelNode | None = None) -> RunResult:
        plan = extract_plan(goal) if goal is not None else None
        return RunResult(
            plan, records, reason, gens, goal.g if goal is not None else None, len(tree) - nodes_before, calls, failures
        )

    while True:
        if not tree.open:
            return finish(EXHAUSTED)
        if deadline is not None and time.perf_counter() >= deadline:
            return finish(DEADLINE)
        if budget is not None and gens >= budget:
            return finish(BOUND)
        open_ = tree.open
        node = open_[-1]
        if best_sol_cost is not None and node.g + node.h >= best_sol_cost:
            open_.pop()
            if plain:
                continue
            return finish(PRUNED)
        if node.config == goals:
            open_.pop()
            if tree.goal_node is None:
                tree.goal_node = node
            return finish(GOAL, node)
        c = next_constraint(tree, node)
        if c is None:
            open_.pop()
            if not plain and visited.get(node.id, node.g + 1) > node.g:
                visited[node.id] = node.g
                succ = [
                    m for m in node.neighbors.values() if best_sol_cost is None or m.g + m.h < best_sol_cost
                ]
                succ.sort(key=lambda m: (-(m.g + m.h), -m.id))
                open_.extend(succ)
            continue
        gens += 1
        calls += 1
        q_to, record = pibt.step(node.config, node.order, c, rng, node.id)
        if q_to is None:
            failures += 1
            continue
        records.append(record)
        if tree.keep_history:
            node.records.append(record)
        known = tree.explored.get(q_to)
        if known is None:
            child = tree.create_child(node, q_to)
            gens += 1
            open_.append(child)
            if q_to == goals and (best_sol_cost is None or child.g < best_sol_cost):
                open_.pop()
                return finish(GOAL, child)
        else:
            improved = relax_g(tree, known, node)
            open_.append(known)
            if improved and (best_sol_cost is None or tree.goal_node.g < best_sol_cost):
                return finish(IMPROVED, tree.goal_node)
