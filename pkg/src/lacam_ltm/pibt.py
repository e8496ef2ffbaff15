"""One-step configuration generator: PIBT with swap handling and traffic recording.

Distances are supplied by any object exposing ``get(agent, vertex) -> float``;
:class:`~lacam_ltm.traffic.TrafficDistances` is the usual one, and
:class:`BfsDistances` gives the classic unit-cost behaviour.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .mapf import Config, Instance
from .traffic import HistoryRecord

FREE = -1


class Distances(Protocol):
    def get(self, i: int, v: int) -> float: ...


class BfsDistances:
    """Unit-cost distances taken from the instance's BFS tables."""

    def __init__(self, instance: Instance):
        self.tables = instance.dist_tables

    def get(self, i: int, v: int) -> float:
        d = self.tables[i][v]
        return float(d) if d >= 0 else float("inf")


@dataclass(frozen=True)
class PositionConstraint:
    """"Who is where" pins: agent ``who[k]`` must move to ``where[k]``."""

    who: tuple[int, ...] = ()
    where: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.who)

    def extend(self, agent: int, vertex: int) -> PositionConstraint:
        return PositionConstraint(self.who + (agent,), self.where + (vertex,))


NO_CONSTRAINT = PositionConstraint()


# Priorities are float arrays: the integer part counts steps spent away from
# the goal, the fractional part is the base value from the root distances.


def root_priorities(distances: Distances, starts: Sequence[int]) -> np.ndarray:
    d = np.array([distances.get(i, s) for i, s in enumerate(starts)], dtype=np.float64)
    return d / (d.max() + 1.0) if len(d) else d


def inherit_priorities(parent: np.ndarray, config: Sequence[int], goals: np.ndarray) -> np.ndarray:
    away = np.fromiter(config, dtype=np.int64, count=len(goals)) != goals
    return np.where(away, parent + 1.0, parent - np.floor(parent))


def priority_order(priorities: np.ndarray) -> list[int]:
    """Agents by descending priority, ties broken by agent id."""
    return np.argsort(-priorities, kind="stable").tolist()


class PIBT:
    """Reusable PIBT generator bound to one instance and one distance provider."""

    def __init__(self, instance: Instance, distances: Distances, swap: bool = True):
        self.instance = instance
        self.distances = distances
        self.swap = swap
        self.n = instance.n
        self.goals = instance.goals
        grid = instance.grid
        self._neighbors = grid.neighbors
        self._nv = grid.num_vertices
        self._occ_now = [FREE] * grid.num_vertices
        self._occ_next = [FREE] * grid.num_vertices
        self._from: Config = ()
        self._ranked: list[list[tuple[float, float, int]] | None] = []
        self._touched: list[int] = []
        self._rng: random.Random = random.Random(0)
        needed = 4 * self.n + 200
        if sys.getrecursionlimit() < needed:
            sys.setrecursionlimit(needed)

    def step(
        self,
        q_from: Config,
        order: Sequence[int],
        constraint: PositionConstraint = NO_CONSTRAINT,
        rng: random.Random | None = None,
        node_id: int = -1,
    ) -> tuple[Config | None, HistoryRecord | None]:
        """Generate one successor of ``q_from``; ``(None, None)`` if the constraint cannot be met."""
        n = self.n
        self._from = q_from
        self._rng = rng if rng is not None else random.Random(0)
        self._ranked = [None] * n
        self._touched = []
        occ_now, occ_next = self._occ_now, self._occ_next
        for i, v in enumerate(q_from):
            occ_now[v] = i
        to = [FREE] * n
        ok = True
        try:
            neighbors = self._neighbors
            for i, v in zip(constraint.who, constraint.where):
                u = q_from[i]
                if to[i] != FREE or (v != u and v not in neighbors[u]) or occ_next[v] != FREE:
                    ok = False
                    break
                j = occ_now[v]
                if j != FREE and j != i and to[j] == u:
                    ok = False
                    break
                to[i] = v
                occ_next[v] = i
                self._touched.append(v)
            if ok:
                for i in order:
                    if to[i] == FREE and not self._pibt(i, to):
                        ok = False
                        break
        finally:
            for v in q_from:
                occ_now[v] = FREE
            for v in self._touched:
                occ_next[v] = FREE
        if not ok:
            return None, None
        q_to = tuple(to)
        return q_to, self._record(q_from, q_to, node_id)

    def _rank(self, i: int) -> list[tuple[float, float, int]]:
        # sort key is distance plus uniform noise in [0, 1): exact ties on unit
        # costs are shuffled, and near ties on weighted costs are too, which is
        # what lets agents escape dead-end livelocks
        v = self._from[i]
        d = self.distances.get
        rnd = self._rng.random
        ranked = []
        for u in self._neighbors[v] + [v]:
            f = d(i, u)
            ranked.append((f + rnd(), f, u))
        ranked.sort()
        self._ranked[i] = ranked
        return ranked

    def _pibt(self, i: int, to: list[int]) -> bool:
        v = self._from[i]
        cands = [u for _, _, u in self._rank(i)]
        swap_agent = FREE
        if self.swap:
            swap_agent = self._swap_partner(i, cands[0], to)
            if swap_agent != FREE:
                cands.reverse()
        occ_now, occ_next, touched = self._occ_now, self._occ_next, self._touched
        for k, u in enumerate(cands):
            if occ_next[u] != FREE:
                continue
            j = occ_now[u]
            if j != FREE and to[j] == v:
                continue
            occ_next[u] = i
            to[i] = u
            touched.append(u)
            if j != FREE and u != v and to[j] == FREE and not self._pibt(j, to):
                continue
            if k == 0 and swap_agent != FREE and to[swap_agent] == FREE and occ_next[v] == FREE:
                occ_next[v] = swap_agent
                to[swap_agent] = v
                touched.append(v)
            return True
        occ_next[v] = i
        to[i] = v
        touched.append(v)
        return False

    # swap rule, following the reference LaCAM* generator

    def _swap_partner(self, i: int, best: int, to: Sequence[int]) -> int:
        q_from, occ_now = self._from, self._occ_now
        j = occ_now[best]
        if (
            j != FREE
            and j != i
            and to[j] == FREE
            and self._swap_required(i, j, q_from[i], q_from[j])
            and self._swap_possible(q_from[j], q_from[i])
        ):
            return j
        if best != q_from[i]:
            # clear operation, cf. push-and-swap
            for u in self._neighbors[q_from[i]]:
                k = occ_now[u]
                if k == FREE or best == q_from[k]:
                    continue
                if self._swap_required(k, i, q_from[i], best) and self._swap_possible(best, q_from[i]):
                    return k
        return FREE

    def _corridor_exits(self, v_pusher: int, v_puller: int) -> tuple[int, int]:
        """Exits of ``v_puller`` other than ``v_pusher`` and dead-ends held by agents at their goal."""
        neighbors, occ_now, goals = self._neighbors, self._occ_now, self.goals
        n = len(neighbors[v_puller])
        last = FREE
        for u in neighbors[v_puller]:
            a = occ_now[u]
            if u == v_pusher or (len(neighbors[u]) == 1 and a != FREE and goals[a] == u):
                n -= 1
            else:
                last = u
        return n, last

    def _swap_required(self, pusher: int, puller: int, v_pusher: int, v_puller: int) -> bool:
        d = self.distances.get
        while d(pusher, v_puller) < d(pusher, v_pusher):
            n, nxt = self._corridor_exits(v_pusher, v_puller)
            if n >= 2:
                return False
            if n <= 0:
                break
            v_pusher, v_puller = v_puller, nxt
        return d(puller, v_pusher) < d(puller, v_puller) and (
            d(pusher, v_pusher) == 0 or d(pusher, v_puller) < d(pusher, v_pusher)
        )

    def _swap_possible(self, v_pusher_origin: int, v_puller_origin: int) -> bool:
        v_pusher, v_puller = v_pusher_origin, v_puller_origin
        for _ in range(self._nv + 1):
            if v_puller == v_pusher_origin:
                return False
            n, nxt = self._corridor_exits(v_pusher, v_puller)
            if n >= 2:
                return True
            if n <= 0:
                return False
            v_pusher, v_puller = v_puller, nxt
        return False

    def _record(self, q_from: Config, q_to: Config, node_id: int) -> HistoryRecord:
        goals = self.goals
        d = self.distances.get
        blocked: list[tuple[int, int]] = []
        for i, (v, w) in enumerate(zip(q_from, q_to)):
            ranked = self._ranked[i]
            if ranked is None:
                fw = d(i, w)
                for u in self._neighbors[v] + [v]:
                    if d(i, u) < fw:
                        blocked.append((i, u))
                continue
            fw = next(f for _, f, u in ranked if u == w)
            blocked.extend((i, u) for _, f, u in ranked if f < fw)
        at_goal = tuple(v == g for v, g in zip(q_from, goals))
        return HistoryRecord(node_id, tuple(q_from), tuple(q_to), at_goal, blocked)

    def swap_ordering(self, q_from: Config, agent: int, rng: random.Random | None = None) -> list[int] | None:
        """Reversed candidate ordering if the swap rule fires for ``agent`` with nobody planned yet."""
        self._from = q_from
        self._rng = rng if rng is not None else random.Random(0)
        self._ranked = [None] * self.n
        occ_now = self._occ_now
        for i, v in enumerate(q_from):
            occ_now[v] = i
        try:
            cands = [u for _, _, u in self._rank(agent)]
            partner = self._swap_partner(agent, cands[0], [FREE] * self.n)
        finally:
            for v in q_from:
                occ_now[v] = FREE
        if partner == FREE:
            return None
        return cands[::-1]


def pibt_step(
    instance: Instance,
    distances: Distances,
    q_from: Config,
    priorities: np.ndarray,
    constraint: PositionConstraint = NO_CONSTRAINT,
    seed: int | random.Random = 0,
    swap: bool = True,
) -> tuple[Config | None, HistoryRecord | None]:
    """Functional wrapper around :meth:`PIBT.step`."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    order = priority_order(np.asarray(priorities, dtype=np.float64))
    return PIBT(instance, distances, swap=swap).step(q_from, order, constraint, rng)


def swap_assist(
    instance: Instance, distances: Distances, q_from: Config, agent: int, seed: int | random.Random = 0
) -> list[int] | None:
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    return PIBT(instance, distances).swap_ordering(q_from, agent, rng)
