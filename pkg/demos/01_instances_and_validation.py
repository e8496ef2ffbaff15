"""Loading a benchmark, checking solutions, and measuring sum-of-loss.

Run with ``python demos/01_instances_and_validation.py``.
"""

import tempfile

from lacam_ltm import Instance, load_instance, parse_map, sum_of_loss, validate_solution
from lacam_ltm.benchmarks import random_grid, random_instance, write_benchmark

# A map in MovingAI format: '.' is free, '@' is blocked.
grid = parse_map("type octile\nheight 3\nwidth 4\nmap\n....\n.@@.\n....\n")
print("vertices:", grid.num_vertices, "directed edges:", grid.num_edges)

# Vertices are dense ids; coordinates are (x, y) with y growing downward.
a = grid.vertex
inst = Instance(grid, starts=(a(0, 0), a(3, 2)), goals=(a(3, 0), a(0, 2)))

# Two agents passing each other around the block.
plan = [
    (a(0, 0), a(3, 2)),
    (a(1, 0), a(2, 2)),
    (a(2, 0), a(1, 2)),
    (a(3, 0), a(0, 2)),
]
print("valid:", validate_solution(inst, plan).ok)
print(sum_of_loss(inst, plan))

# A swap along one edge is rejected, with the offending step and agents.
bad = [(a(0, 0), a(1, 0)), (a(1, 0), a(0, 0))]
print(validate_solution(Instance(grid, bad[0], bad[1]), bad))

# Random 32x32 maps with 20% obstacles stand in for the MovingAI random set.
big = random_instance(random_grid(32, 32, 20, seed=0), 50, seed=1)
with tempfile.TemporaryDirectory() as tmp:
    map_path, scen_path = write_benchmark(big, tmp, "random-32-32-20")
    again = load_instance(map_path, scen_path, 50)
print("round trip keeps the instance:", again.starts == big.starts and again.goals == big.goals)
