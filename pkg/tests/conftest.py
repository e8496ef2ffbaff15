from __future__ import annotations

import numpy as np
import pytest

from lacam_ltm import Grid, Instance, parse_map

CORRIDOR_MAP = "type octile\nheight 1\nwidth 3\nmap\n...\n"
CORRIDOR_SCEN = "version 1\n0\tc.map\t3\t1\t0\t0\t2\t0\t2\n"


def grid_from_rows(*rows: str) -> Grid:
    text = f"type octile\nheight {len(rows)}\nwidth {len(rows[0])}\nmap\n" + "\n".join(rows) + "\n"
    return parse_map(text)


def tiny_instances(count: int = 24, seed: int = 2024) -> list[Instance]:
    """Random solvable-looking instances on grids up to 5x5 with up to 3 agents, plus hand-made ones."""
    from oracles import grid_adjacency, optimal_sum_of_loss

    out: list[Instance] = []
    # hand-made: two agents swap in a corridor with a side pocket
    g = grid_from_rows("...", "#.#".replace("#", "@"))
    out.append(Instance.from_coords(g, [(0, 0), (2, 0)], [(2, 0), (0, 0)], "pocket-swap"))
    g = grid_from_rows(".....")
    out.append(Instance.from_coords(g, [(0, 0)], [(4, 0)], "line"))
    g = grid_from_rows("...", "...", "...")
    out.append(Instance.from_coords(g, [(0, 0), (1, 1), (2, 2)], [(2, 2), (1, 1), (0, 0)], "diagonal"))
    rng = np.random.default_rng(seed)
    while len(out) < count:
        w, h = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        mask = rng.random((h, w)) > 0.2
        if mask.sum() < 3:
            continue
        cells, adj = grid_adjacency(mask)
        n = int(rng.integers(1, min(3, len(cells) - 1) + 1))
        starts = tuple(int(v) for v in rng.permutation(len(cells))[:n])
        goals = tuple(int(v) for v in rng.permutation(len(cells))[:n])
        if optimal_sum_of_loss(adj, starts, goals) is None:
            continue
        grid = Grid(mask)
        out.append(Instance(grid, starts, goals, f"tiny-{len(out)}"))
    return out


@pytest.fixture
def corridor_files(tmp_path):
    m = tmp_path / "c.map"
    s = tmp_path / "c.scen"
    m.write_text(CORRIDOR_MAP)
    s.write_text(CORRIDOR_SCEN)
    return m, s


# one line per acceptance criterion, echoed in the terminal summary
CRITERIA_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
