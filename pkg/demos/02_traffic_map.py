"""How PIBT traffic turns into edge penalties and weighted distances.

Run with ``python demos/02_traffic_map.py``.
"""

import numpy as np

from lacam_ltm import BfsDistances, DistanceOracle, Instance, TrafficDistances, TrafficMap, parse_map, pibt_step
from lacam_ltm.pibt import root_priorities

grid = parse_map("type octile\nheight 3\nwidth 5\nmap\n.....\n.....\n.....\n")
a = grid.vertex

# Four agents cross the middle row; each PIBT step yields a history record.
inst = Instance(grid, (a(0, 1), a(1, 1), a(4, 1), a(3, 1)), (a(4, 1), a(3, 0), a(0, 1), a(1, 2)))
ltm = TrafficMap(grid, w_lb=0, w_ub=10)
q = inst.starts
prio = root_priorities(BfsDistances(inst), q)
records = []
for t in range(4):
    q, rec = pibt_step(inst, BfsDistances(inst), q, prio, seed=t)
    records.append(rec)
    print("t", t + 1, [grid.coords[v] for v in q], "blocked:", rec.blocked_actions)

# Moves add 1 to their directed edge, waits away from the goal add 1 to every outgoing edge.
ltm.apply_history(records)
busy = np.argsort(-ltm.raw)[:5]
for e in busy:
    u, v = grid.edge_src[e], grid.edge_dst[e]
    print(f"{grid.coords[u]} -> {grid.coords[v]}: raw {ltm.raw[e]}, penalty {ltm.penalty[e]:.3f}")

# Distances now avoid the busy edges. A fresh oracle per map version answers them lazily.
goal = a(4, 1)
print("unit distance from (0,1):", BfsDistances(inst).get(0, a(0, 1)))
print("weighted distance from (0,1):", DistanceOracle(ltm, goal).dist(a(0, 1)))
print("same via per-agent cache:", TrafficDistances(ltm, inst.goals).get(0, a(0, 1)))

# Removing the records restores the uniform map exactly.
ltm.remove_history(records)
print("raw after removal:", int(ltm.raw.sum()), "max penalty:", ltm.penalty.max())
