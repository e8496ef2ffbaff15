"""Anytime one-shot solving: traffic-guided restarts against plain LaCAM*.

Run with ``python demos/03_oneshot_anytime.py [agents] [seconds]``.
"""

import sys

from lacam_ltm import SolveConfig, solve_oneshot
from lacam_ltm.benchmarks import random_grid, random_instance

agents = int(sys.argv[1]) if len(sys.argv) > 1 else 200
seconds = float(sys.argv[2]) if len(sys.argv) > 2 else 10.0

inst = random_instance(random_grid(32, 32, 20, seed=0), agents, seed=0)

results = {}
for use_ltm in (True, False):
    res = results[use_ltm] = solve_oneshot(inst, SolveConfig(time_limit=seconds, use_ltm=use_ltm))
    label = "with traffic map" if use_ltm else "plain baseline"
    m = res.metrics(inst)
    print(f"{label}: {len(res.events)} improvements, final SoL {m.sol} (ratio {float(m.sol_ratio):.3f})")
    for e in res.events[:8]:
        print(f"  {e.time:7.2f}s  iteration {e.iteration:4d}  SoL {e.sol}")

# The map learned by the guided run can be dumped for a heatmap.
learned = results[True].ltm
print("busiest edge count:", learned.max_raw)
learned.dump_csv("ltm.csv")
