"""Planning and execution: commit X actions every E*X seconds while the search continues.

Run with ``python demos/04_planning_and_execution.py``.
"""

from lacam_ltm import SolveConfig, solve_pe
from lacam_ltm.benchmarks import random_grid, random_instance

inst = random_instance(random_grid(32, 32, 20, seed=0), 50, seed=3)

for X in (5, 10, 20):
    trace = solve_pe(inst, SolveConfig(mode="pe", exec_time=0.1, commit=X))
    kinds = "".join("P" if w.committed == "plan" else "W" for w in trace.windows)
    print(f"X={X:2d}: {trace.status}, SoL {trace.metrics.sol}, windows {kinds}")

# Starving the first window forces X waits before the agents move.
trace = solve_pe(inst, SolveConfig(mode="pe", exec_time=0.1, commit=5, first_window_budget=1))
print("starved:", trace.windows[0].committed, "then SoL", trace.metrics.sol)
print("prefix hash after window 0:", trace.windows[0].prefix_hash[:16], "...")
