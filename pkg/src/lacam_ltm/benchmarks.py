"""Random grid maps and scenarios in the style of the MovingAI ``random-W-H-P`` set."""

from __future__ import annotations

from collections import deque
from pathlib import Path

import numpy as np

from .mapf import Grid, Instance, serialize_map


def random_grid(width: int, height: int, obstacle_percent: float, seed: int = 0) -> Grid:
    """Grid with ``obstacle_percent`` blocked cells, keeping only the largest connected region."""
    rng = np.random.default_rng(seed)
    cells = width * height
    blocked = rng.permutation(cells)[: int(round(cells * obstacle_percent / 100.0))]
    mask = np.ones(cells, dtype=bool)
    mask[blocked] = False
    mask = mask.reshape(height, width)
    return Grid(_largest_component(mask))


def _largest_component(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    label = np.full(mask.shape, -1, dtype=np.int64)
    sizes = []
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or label[y0, x0] >= 0:
                continue
            k = len(sizes)
            label[y0, x0] = k
            queue = deque([(x0, y0)])
            size = 0
            while queue:
                x, y = queue.popleft()
                size += 1
                for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                    if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and label[ny, nx] < 0:
                        label[ny, nx] = k
                        queue.append((nx, ny))
            sizes.append(size)
    if not sizes:
        return mask.copy()
    return label == int(np.argmax(sizes))


def random_instance(grid: Grid, n: int, seed: int = 0, name: str = "") -> Instance:
    """``n`` agents with distinct random starts and distinct random goals."""
    if n > grid.num_vertices:
        raise ValueError(f"{n} agents do not fit on {grid.num_vertices} vertices")
    rng = np.random.default_rng(seed)
    starts = rng.permutation(grid.num_vertices)[:n]
    goals = rng.permutation(grid.num_vertices)[:n]
    return Instance(grid, tuple(int(v) for v in starts), tuple(int(v) for v in goals), name)


def scenario_text(instance: Instance, map_name: str) -> str:
    g = instance.grid
    lines = ["version 1"]
    for s, t in zip(instance.starts, instance.goals):
        sx, sy = g.coords[s]
        gx, gy = g.coords[t]
        opt = instance.dist_tables[len(lines) - 1][s]
        lines.append(f"0\t{map_name}\t{g.width}\t{g.height}\t{sx}\t{sy}\t{gx}\t{gy}\t{opt}")
    return "\n".join(lines) + "\n"


def write_benchmark(instance: Instance, directory: str | Path, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>.map`` and ``<stem>.scen`` and return their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    map_path = directory / f"{stem}.map"
    scen_path = directory / f"{stem}.scen"
    map_path.write_text(serialize_map(instance.grid), encoding="utf-8")
    scen_path.write_text(scenario_text(instance, map_path.name), encoding="utf-8")
    return map_path, scen_path
