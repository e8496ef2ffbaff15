"""Lightweight traffic map: directed edge counters, bounded penalties, weighted distances."""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mapf import Grid

PENALTY_DECIMALS = 9


class IntegrityError(RuntimeError):
    """Raised when removing history that was never applied, or for stale search state."""


class StaleOracleError(RuntimeError):
    """A distance oracle was queried after its traffic map changed."""


@dataclass(eq=False)
class HistoryRecord:
    """Traffic observed in one generator call.

    ``from_v[i] -> to_v[i]`` is agent ``i``'s committed action; ``blocked``
    holds ``(agent, candidate)`` pairs for candidates the agent ranked strictly
    better than what it got. ``at_goal[i]`` refers to the from-configuration.
    """

    node_id: int
    from_v: tuple[int, ...]
    to_v: tuple[int, ...]
    at_goal: tuple[bool, ...]
    blocked: list[tuple[int, int]] = field(default_factory=list)
    _edges: np.ndarray | None = field(default=None, repr=False)

    @property
    def blocked_actions(self) -> list[tuple[int, int]]:
        return [(self.from_v[i], c) for i, c in self.blocked]

    def edge_increments(self, grid: Grid) -> np.ndarray:
        """Directed edge ids to increment (with repetition) for this record."""
        if self._edges is None:
            offset = grid.edge_offset
            neighbors = grid.neighbors
            at_goal = self.at_goal
            out: list[int] = []

            def add(i: int, u: int, v: int) -> None:
                if u != v:
                    out.append(offset[u] + neighbors[u].index(v))
                elif not at_goal[i]:
                    # wait: spread to every outgoing edge
                    out.extend(range(offset[u], offset[u] + len(neighbors[u])))

            for i, (u, v) in enumerate(zip(self.from_v, self.to_v)):
                add(i, u, v)
            from_v = self.from_v
            for i, c in self.blocked:
                add(i, from_v[i], c)
            self._edges = np.array(out, dtype=np.int64)
        return self._edges


class TrafficMap:
    """Raw directed-edge traffic counts and their penalties normalised into ``[w_lb, w_ub]``.

    The effective traversal cost of a directed edge is ``1 + penalty``.
    """

    def __init__(self, grid: Grid, w_lb: float = 0.0, w_ub: float = 10.0):
        if not (0 <= w_lb < w_ub) or not math.isfinite(w_ub):
            raise ValueError(f"invalid penalty bounds [{w_lb}, {w_ub}]")
        self.grid = grid
        self.w_lb = float(w_lb)
        self.w_ub = float(w_ub)
        self.raw = np.zeros(grid.num_edges, dtype=np.int64)
        self.penalty = np.full(grid.num_edges, self.w_lb, dtype=np.float64)
        self.max_raw = 0
        self.version = 0
        self._costs: list[float] | None = None

    def cost(self, u: int, v: int) -> float:
        return 1.0 + float(self.penalty[self.grid.edge_id(u, v)])

    def edge_costs(self) -> list[float]:
        """Traversal cost per directed edge id, cached for the current version."""
        if self._costs is None:
            self._costs = (1.0 + self.penalty).tolist()
        return self._costs

    def _counts(self, records: Iterable[HistoryRecord]) -> np.ndarray:
        edges = [r.edge_increments(self.grid) for r in records]
        if not edges:
            return np.zeros(self.grid.num_edges, dtype=np.int64)
        return np.bincount(np.concatenate(edges), minlength=self.grid.num_edges).astype(np.int64)

    def apply_history(self, records: Sequence[HistoryRecord]) -> TrafficMap:
        self.raw += self._counts(records)
        self._renormalize()
        return self

    def remove_history(self, records: Sequence[HistoryRecord]) -> TrafficMap:
        counts = self._counts(records)
        if np.any(counts > self.raw):
            raise IntegrityError("removing traffic that was never applied")
        self.raw -= counts
        self._renormalize()
        return self

    def _renormalize(self) -> None:
        self.max_raw = int(self.raw.max()) if self.raw.size else 0
        if self.max_raw > 0:
            scaled = self.w_lb + (self.raw / self.max_raw) * (self.w_ub - self.w_lb)
            penalty = np.clip(np.round(scaled, PENALTY_DECIMALS), self.w_lb, self.w_ub)
            # the endpoints stay exact even when the bounds carry more decimals
            penalty[self.raw == 0] = self.w_lb
            penalty[self.raw == self.max_raw] = self.w_ub
            self.penalty = penalty
        else:
            self.penalty = np.full(self.grid.num_edges, self.w_lb, dtype=np.float64)
        self.version += 1
        self._costs = None

    def rows(self) -> list[tuple[int, int, int, int, int, float]]:
        g = self.grid
        return [
            (g.xs[u], g.ys[u], g.xs[v], g.ys[v], int(r), float(p))
            for u, v, r, p in zip(g.edge_src.tolist(), g.edge_dst.tolist(), self.raw, self.penalty)
        ]

    def dump_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["from_x", "from_y", "to_x", "to_y", "raw", "penalty"])
            for fx, fy, tx, ty, r, p in self.rows():
                writer.writerow([fx, fy, tx, ty, r, f"{p:.9f}"])


class DistanceOracle:
    """Backward A* from one goal over the weighted traffic map, resumed on demand.

    The Manhattan heuristic toward the first queried vertex is consistent
    because every edge costs at least 1, so each settled vertex holds its exact
    weighted distance and later queries only continue the same search.
    """

    def __init__(self, ltm: TrafficMap, goal: int):
        self.ltm = ltm
        self.goal = goal
        self.version = ltm.version
        grid = ltm.grid
        self._costs = ltm.edge_costs()
        self._in_edges = grid.in_edges
        self._xs = grid.xs
        self._ys = grid.ys
        nv = grid.num_vertices
        self.settled = [-1.0] * nv
        self._g = [math.inf] * nv
        self._open: list[tuple[float, float, int]] | None = None
        self._target = goal

    def _h(self, v: int) -> float:
        return abs(self._xs[v] - self._xs[self._target]) + abs(self._ys[v] - self._ys[self._target])

    def dist(self, v: int) -> float:
        if self.ltm.version != self.version:
            raise StaleOracleError("traffic map changed; create a new oracle")
        d = self.settled[v]
        if d >= 0.0:
            return d
        return self._resume(v)

    def _resume(self, v: int) -> float:
        settled, g_best, costs, in_edges = self.settled, self._g, self._costs, self._in_edges
        if self._open is None:
            self._target = v
            g_best[self.goal] = 0.0
            self._open = [(self._h(self.goal), 0.0, self.goal)]
        heap = self._open
        xs, ys = self._xs, self._ys
        tx, ty = xs[self._target], ys[self._target]
        while heap:
            _, g, u = heapq.heappop(heap)
            if settled[u] >= 0.0:
                continue
            settled[u] = g
            for w, eid in in_edges[u]:
                if settled[w] >= 0.0:
                    continue
                ng = g + costs[eid]
                if ng < g_best[w]:
                    g_best[w] = ng
                    heapq.heappush(heap, (ng + abs(xs[w] - tx) + abs(ys[w] - ty), ng, w))
            if u == v:
                return g
        return math.inf


class TrafficDistances:
    """Per-agent :class:`DistanceOracle` objects, recreated lazily after each map update."""

    def __init__(self, ltm: TrafficMap, goals: Sequence[int]):
        self.ltm = ltm
        self.goals = tuple(goals)
        self._oracles: list[DistanceOracle | None] = [None] * len(self.goals)

    def oracle(self, i: int) -> DistanceOracle:
        o = self._oracles[i]
        if o is None or o.version != self.ltm.version:
            o = DistanceOracle(self.ltm, self.goals[i])
            self._oracles[i] = o
        return o

    def get(self, i: int, v: int) -> float:
        o = self._oracles[i]
        if o is None or o.version != self.ltm.version:
            o = self.oracle(i)
        d = o.settled[v]
        if d >= 0.0:
            return d
        return o.dist(v)


def ltm_dist(oracle: DistanceOracle, v: int) -> float:
    return oracle.dist(v)

