"""Reference computations written independently of the solver code.

Only the grid's passability mask and the traffic map's raw arrays are read
from the package; everything else is recomputed here.
"""

from __future__ import annotations

import heapq
import itertools

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra


def grid_adjacency(passable: np.ndarray) -> tuple[list[tuple[int, int]], list[list[int]]]:
    """Row-major cells and 4-neighbour lists built from a boolean mask."""
    h, w = passable.shape
    cells = [(x, y) for y in range(h) for x in range(w) if passable[y, x]]
    index = {c: k for k, c in enumerate(cells)}
    adj = []
    for x, y in cells:
        adj.append([index[(x + dx, y + dy)] for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)) if (x + dx, y + dy) in index])
    return cells, adj


def optimal_sum_of_loss(adj: list[list[int]], starts: tuple[int, ...], goals: tuple[int, ...]) -> int | None:
    """Dijkstra over joint configurations.

    A transition costs the number of agents away from their goal in the
    departing configuration. Vertex and swap conflicts are forbidden.
    """
    n = len(starts)
    moves = [adj[v] + [v] for v in range(len(adj))]
    dist = {starts: 0}
    heap = [(0, starts)]
    while heap:
        d, q = heapq.heappop(heap)
        if q == goals:
            return d
        if d > dist[q]:
            continue
        step = sum(1 for v, g in zip(q, goals) if v != g)
        for nxt in itertools.product(*(moves[v] for v in q)):
            if len(set(nxt)) < n:
                continue
            if any(nxt[i] == q[j] and nxt[j] == q[i] for i in range(n) for j in range(i + 1, n) if q[i] != nxt[i]):
                continue
            nd = d + step
            if nd < dist.get(nxt, 1 << 60):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return None


def weighted_distances_to(grid, penalty: np.ndarray, goal: int) -> np.ndarray:
    """Distances from every vertex to ``goal`` where edge ``u->v`` costs ``1 + penalty(u->v)``.

    scipy's Dijkstra runs from the goal over the transposed graph.
    """
    src = np.asarray(grid.edge_src)
    dst = np.asarray(grid.edge_dst)
    nv = grid.num_vertices
    reversed_graph = csr_matrix((1.0 + penalty, (dst, src)), shape=(nv, nv))
    return dijkstra(reversed_graph, directed=True, indices=goal)


def normalized_penalties(raw: np.ndarray, w_lb: float, w_ub: float) -> np.ndarray:
    """Linear min-max scaling of raw counts into ``[w_lb, w_ub]``."""
    top = raw.max()
    if top == 0:
        return np.full(len(raw), float(w_lb))
    return w_lb + raw / top * (w_ub - w_lb)
