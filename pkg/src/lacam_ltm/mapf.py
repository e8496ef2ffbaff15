"""Grid graphs, MAPF instances, MovingAI parsing, validation and sum-of-loss.

Vertices are dense integer ids assigned row-major over passable cells. A
configuration is a tuple holding one vertex id per agent, and a solution is a
list of configurations starting at the starts and ending at the goals.
"""

from __future__ import annotations

import operator
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

Config = tuple[int, ...]
Solution = list[Config]
Coord = tuple[int, int]  # (x, y)

UNREACHABLE: int = -1
"""Marker used by :func:`bfs_dist` for vertices that cannot reach the goal."""

PASSABLE_CHARS = frozenset(".G")
BLOCKED_CHARS = frozenset("@TO")

# (dx, dy): up, right, down, left
MOVES: tuple[Coord, ...] = ((0, -1), (1, 0), (0, 1), (-1, 0))


class ParseError(ValueError):
    """Malformed benchmark file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InstanceError(ValueError):
    """Instance violates its invariants (duplicate starts, unreachable goal, ...)."""


class InvalidSolutionError(ValueError):
    pass


TextSource = Union[str, TextIO, Iterable[str]]


def _lines(text: TextSource) -> list[str]:
    if isinstance(text, str):
        return text.splitlines()
    return [line.rstrip("\r\n") for line in text]


class Grid:
    """4-connected grid graph over the passable cells of a boolean mask.

    Attributes:
        width, height: Grid dimensions in cells.
        passable: ``(height, width)`` boolean array.
        index: ``(height, width)`` int array mapping a cell to its vertex id, -1 if blocked.
        coords: Vertex id to ``(x, y)``.
        neighbors: Vertex id to list of adjacent vertex ids.
        edge_offset: Directed edge ``u -> neighbors[u][k]`` has id ``edge_offset[u] + k``.
        in_edges: Vertex id ``v`` to list of ``(u, edge id of u -> v)``.
    """

    def __init__(self, passable: np.ndarray):
        passable = np.asarray(passable, dtype=bool)
        if passable.ndim != 2:
            raise ValueError("passable mask must be two-dimensional")
        self.passable = passable.copy()
        self.passable.flags.writeable = False
        self.height, self.width = passable.shape

        index = np.full(passable.shape, -1, dtype=np.int64)
        ys, xs = np.nonzero(passable)
        index[ys, xs] = np.arange(len(ys))
        self.index = index
        self.index.flags.writeable = False
        self.coords: list[Coord] = [(int(x), int(y)) for y, x in zip(ys, xs)]
        self.xs: list[int] = [c[0] for c in self.coords]
        self.ys: list[int] = [c[1] for c in self.coords]

        self.neighbors: list[list[int]] = []
        for x, y in self.coords:
            adj = []
            for dx, dy in MOVES:
                nx, ny = x + dx, y + dy
                if 0 <= nx < self.width and 0 <= ny < self.height and passable[ny, nx]:
                    adj.append(int(index[ny, nx]))
            self.neighbors.append(adj)

        self.edge_offset: list[int] = []
        total = 0
        for adj in self.neighbors:
            self.edge_offset.append(total)
            total += len(adj)
        self.num_edges = total

        src, dst = [], []
        for u, adj in enumerate(self.neighbors):
            src.extend([u] * len(adj))
            dst.extend(adj)
        self.edge_src = np.array(src, dtype=np.int64)
        self.edge_dst = np.array(dst, dtype=np.int64)

        self.in_edges: list[list[tuple[int, int]]] = [[] for _ in self.coords]
        for u, adj in enumerate(self.neighbors):
            for k, v in enumerate(adj):
                self.in_edges[v].append((u, self.edge_offset[u] + k))

    @property
    def num_vertices(self) -> int:
        return len(self.coords)

    def vertex(self, x: int, y: int) -> int:
        """Vertex id at cell ``(x, y)``; raises ``KeyError`` for blocked or outside cells."""
        if not (0 <= x < self.width and 0 <= y < self.height) or not self.passable[y, x]:
            raise KeyError(f"cell ({x},{y}) is not a passable cell")
        return int(self.index[y, x])

    def edge_id(self, u: int, v: int) -> int:
        return self.edge_offset[u] + self.neighbors[u].index(v)

    def out_edges(self, u: int) -> range:
        return range(self.edge_offset[u], self.edge_offset[u] + len(self.neighbors[u]))

    def num_undirected_edges(self) -> int:
        return self.num_edges // 2

    def manhattan(self, u: int, v: int) -> int:
        return abs(self.xs[u] - self.xs[v]) + abs(self.ys[u] - self.ys[v])


def parse_map(text: TextSource) -> Grid:
    """Parse a MovingAI ``.map`` file.

    The header is ``type <name>``, ``height H``, ``width W`` and ``map``; then
    exactly ``H`` rows of ``W`` cells follow. ``.`` and ``G`` are passable,
    ``@``, ``T`` and ``O`` are blocked.
    """
    lines = _lines(text)
    header: dict[str, int] = {}
    i = 0
    if not lines or not lines[0].strip().startswith("type"):
        raise ParseError("expected 'type' header", 1)
    i = 1
    while True:
        if i >= len(lines):
            raise ParseError("missing 'map' header line", i + 1)
        parts = lines[i].split()
        if parts == ["map"]:
            i += 1
            break
        if len(parts) != 2 or parts[0] not in ("height", "width") or parts[0] in header:
            raise ParseError(f"malformed header line {lines[i]!r}", i + 1)
        try:
            header[parts[0]] = int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer {parts[0]} {parts[1]!r}", i + 1) from None
        i += 1
    if "height" not in header or "width" not in header:
        raise ParseError("header must declare both height and width", i)
    height, width = header["height"], header["width"]
    if height <= 0 or width <= 0:
        raise ParseError("height and width must be positive", i)

    rows = lines[i:]
    while rows and not rows[-1].strip():
        rows.pop()
    passable = np.zeros((height, width), dtype=bool)
    for r, row in enumerate(rows):
        lineno = i + r + 1
        if r >= height:
            raise ParseError(f"row count exceeds height {height}", lineno)
        if len(row) != width:
            raise ParseError(f"row length {len(row)} != width {width}", lineno)
        for c, ch in enumerate(row):
            if ch in PASSABLE_CHARS:
                passable[r, c] = True
            elif ch not in BLOCKED_CHARS:
                raise ParseError(f"unknown cell character {ch!r}", lineno)
    if len(rows) != height:
        raise ParseError(f"row count {len(rows)} != height {height}", i + len(rows))
    return Grid(passable)


def serialize_map(grid: Grid, map_type: str = "octile") -> str:
    rows = ["".join("." if p else "@" for p in row) for row in grid.passable]
    return "\n".join([f"type {map_type}", f"height {grid.height}", f"width {grid.width}", "map", *rows]) + "\n"


def load_map(path: str | Path) -> Grid:
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh)


def bfs_dist(grid: Grid, goal: int) -> list[int]:
    """Unit-cost distance from every vertex to ``goal``; :data:`UNREACHABLE` if none."""
    if not 0 <= goal < grid.num_vertices:
        raise ValueError(f"goal {goal} is not a vertex of the grid")
    dist = [UNREACHABLE] * grid.num_vertices
    dist[goal] = 0
    queue = deque([goal])
    neighbors = grid.neighbors
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in neighbors[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = du
                queue.append(v)
    return dist


@dataclass(eq=False)
class Instance:
    """Start and goal vertices for ``n`` agents on a grid."""

    grid: Grid
    starts: Config
    goals: Config
    name: str = ""

    def __post_init__(self) -> None:
        self.starts = tuple(int(v) for v in self.starts)
        self.goals = tuple(int(v) for v in self.goals)
        if len(self.starts) != len(self.goals):
            raise InstanceError("starts and goals differ in length")
        nv = self.grid.num_vertices
        for kind, cfg in (("start", self.starts), ("goal", self.goals)):
            for i, v in enumerate(cfg):
                if not 0 <= v < nv:
                    raise InstanceError(f"agent {i}: {kind} {v} is not a passable vertex")
            if len(set(cfg)) != len(cfg):
                raise InstanceError(f"{kind}s are not pairwise distinct")
        for i, (s, t) in enumerate(zip(self.starts, self.goals)):
            if self.dist_tables[i][s] == UNREACHABLE:
                raise InstanceError(f"agent {i}: goal unreachable from start")

    @classmethod
    def from_coords(cls, grid: Grid, starts: Sequence[Coord], goals: Sequence[Coord], name: str = "") -> Instance:
        try:
            s = tuple(grid.vertex(x, y) for x, y in starts)
            g = tuple(grid.vertex(x, y) for x, y in goals)
        except KeyError as exc:
            raise InstanceError(str(exc)) from None
        return cls(grid, s, g, name)

    @property
    def n(self) -> int:
        return len(self.starts)

    @cached_property
    def dist_tables(self) -> list[list[int]]:
        return [bfs_dist(self.grid, g) for g in self.goals]


def parse_scen(text: TextSource, n: int, grid: Grid, name: str = "") -> Instance:
    """Build an instance from the first ``n`` entries of a MovingAI ``.scen`` file."""
    lines = _lines(text)
    if not lines or lines[0].split()[:1] != ["version"]:
        raise ParseError("expected 'version' header", 1)
    if n < 1:
        raise ValueError("agent count must be at least 1")
    starts: list[int] = []
    goals: list[int] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if len(starts) == n:
            break
        if not line.strip():
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) < 8:
            raise ParseError(f"expected 9 fields, got {len(fields)}", lineno)
        try:
            width, height, sx, sy, gx, gy = (int(f) for f in fields[2:8])
        except ValueError:
            raise ParseError("non-integer coordinate or dimension field", lineno) from None
        if (width, height) != (grid.width, grid.height):
            raise ParseError(
                f"dimension mismatch: scenario declares {width}x{height}, map is {grid.width}x{grid.height}",
                lineno,
            )
        agent = len(starts)
        try:
            starts.append(grid.vertex(sx, sy))
        except KeyError:
            raise ParseError(f"agent {agent}: start ({sx},{sy}) is blocked or outside the map", lineno) from None
        try:
            goals.append(grid.vertex(gx, gy))
        except KeyError:
            raise ParseError(f"agent {agent}: goal ({gx},{gy}) is blocked or outside the map", lineno) from None
    if len(starts) < n:
        raise ParseError(f"requested {n} agents but scenario has only {len(starts)} entries")
    return Instance(grid, tuple(starts), tuple(goals), name)


def load_instance(map_path: str | Path, scen_path: str | Path, n: int) -> Instance:
    grid = load_map(map_path)
    with open(scen_path, encoding="utf-8") as fh:
        return parse_scen(fh, n, grid, name=Path(scen_path).name)


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_solution`.

    ``kind`` is one of ``"agents"``, ``"empty"``, ``"start"``, ``"goal"``,
    ``"adjacency"``, ``"vertex"``, ``"swap"``. ``step`` is the index of the
    offending configuration (for moves and swaps, the departing one).
    """

    ok: bool
    kind: str | None = None
    step: int | None = None
    agents: tuple[int, ...] = ()
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _fail(kind: str, step: int | None, agents: tuple[int, ...], message: str) -> ValidationReport:
    return ValidationReport(False, kind, step, agents, message)


def validate_transition(grid: Grid, q_from: Sequence[int], q_to: Sequence[int], step: int = 0) -> ValidationReport:
    """Check one transition: waits or unit moves, no vertex conflicts in ``q_to``, no swaps."""
    neighbors = grid.neighbors
    for i, (u, v) in enumerate(zip(q_from, q_to)):
        if u != v and v not in neighbors[u]:
            return _fail("adjacency", step, (i,), f"agent {i} jumps {u} -> {v}")
    seen: dict[int, int] = {}
    for i, v in enumerate(q_to):
        if v in seen:
            return _fail("vertex", step + 1, (seen[v], i), f"agents {seen[v]} and {i} share vertex {v}")
        seen[v] = i
    where_from = {u: i for i, u in enumerate(q_from)}
    for i, (u, v) in enumerate(zip(q_from, q_to)):
        if u == v:
            continue
        j = where_from.get(v)
        if j is not None and j != i and q_to[j] == u:
            pair = (min(i, j), max(i, j))
            return _fail("swap", step, pair, f"agents {pair[0]} and {pair[1]} swap along {u}-{v}")
    return ValidationReport(True)


def validate_solution(instance: Instance, solution: Sequence[Sequence[int]]) -> ValidationReport:
    """Check start/goal endpoints, moves, vertex conflicts and swap conflicts."""
    if len(solution) == 0:
        return _fail("empty", None, (), "solution has no configurations")
    for t, q in enumerate(solution):
        if len(q) != instance.n:
            return _fail("agents", t, (), f"step {t} has {len(q)} entries, expected {instance.n}")
    if tuple(solution[0]) != instance.starts:
        bad = tuple(i for i, (v, s) in enumerate(zip(solution[0], instance.starts)) if v != s)
        return _fail("start", 0, bad, "first configuration differs from starts")
    seen: dict[int, int] = {}
    for i, v in enumerate(solution[0]):
        if v in seen:
            return _fail("vertex", 0, (seen[v], i), f"agents {seen[v]} and {i} share vertex {v}")
        seen[v] = i
    for t in range(len(solution) - 1):
        report = validate_transition(instance.grid, solution[t], solution[t + 1], t)
        if not report.ok:
            return report
    last = len(solution) - 1
    if tuple(solution[-1]) != instance.goals:
        bad = tuple(i for i, (v, g) in enumerate(zip(solution[-1], instance.goals)) if v != g)
        return _fail("goal", last, bad, "last configuration differs from goals")
    return ValidationReport(True)


@dataclass
class Metrics:
    sol: int
    sol_lower_bound: int
    sol_ratio: Fraction
    makespan: int

    def as_dict(self) -> dict:
        return {
            "sol": self.sol,
            "sol_lower_bound": self.sol_lower_bound,
            "sol_ratio": float(self.sol_ratio),
            "makespan": self.makespan,
        }


def sol_lower_bound(instance: Instance) -> int:
    return sum(table[s] for table, s in zip(instance.dist_tables, instance.starts))


def sum_of_loss(instance: Instance, solution: Sequence[Sequence[int]], convention: str = "from") -> Metrics:
    """Sum-of-loss of a valid solution.

    With ``convention="from"`` each step ``t < T`` counts the agents whose
    vertex at ``t`` is not their goal. ``convention="both"`` instead counts an
    agent in a transition unless both of its endpoints are the goal.
    """
    report = validate_solution(instance, solution)
    if not report.ok:
        raise InvalidSolutionError(report.message)
    goals = instance.goals
    makespan = len(solution) - 1
    while makespan > 0 and tuple(solution[makespan - 1]) == goals:
        makespan -= 1  # trailing goal-waits (execution padding) are not part of the makespan
    if convention == "from":
        sol = sum(sum(map(operator.ne, solution[t], goals)) for t in range(makespan))
    elif convention == "both":
        sol = 0
        for t in range(makespan):
            sol += sum(1 for a, b, g in zip(solution[t], solution[t + 1], goals) if not (a == g and b == g))
    else:
        raise ValueError(f"unknown sum-of-loss convention {convention!r}")
    lb = sol_lower_bound(instance)
    ratio = Fraction(sol, lb) if lb > 0 else Fraction(1)
    return Metrics(sol, lb, ratio, makespan)


def solution_to_paths(grid: Grid, solution: Sequence[Sequence[int]]) -> list[list[Coord]]:
    """Transpose a configuration sequence into per-agent coordinate paths."""
    if not solution:
        return []
    return [[grid.coords[q[i]] for q in solution] for i in range(len(solution[0]))]


def format_paths(grid: Grid, solution: Sequence[Sequence[int]]) -> str:
    lines = [",".join(f"({x},{y})" for x, y in path) for path in solution_to_paths(grid, solution)]
    return "".join(line + "\n" for line in lines)


def parse_paths(grid: Grid, text: TextSource) -> Solution:
    """Inverse of :func:`format_paths`."""
    paths: list[list[int]] = []
    for lineno, line in enumerate(_lines(text), start=1):
        line = line.strip()
        if not line:
            continue
        cells = line.replace(" ", "").strip("()").split("),(")
        try:
            path = [grid.vertex(*(int(c) for c in cell.split(","))) for cell in cells]
        except (ValueError, KeyError, TypeError):
            raise ParseError(f"bad path entry {line!r}", lineno) from None
        paths.append(path)
    if not paths:
        return []
    length = len(paths[0])
    if any(len(p) != length for p in paths):
        raise ParseError("paths have different lengths")
    return [tuple(p[t] for p in paths) for t in range(length)]
