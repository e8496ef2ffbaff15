"""Anytime multi-agent path finding: LaCAM* guided by an online traffic map."""

from .anytime import (
    AnytimeEvent,
    ExecutionTrace,
    OneShotResult,
    SolveConfig,
    select_restart_node,
    solve_oneshot,
    solve_pe,
)
from .lacam import HighLevelNode, RunResult, SearchTree, edge_cost, lacam_run, next_constraint, relax_g
from .mapf import (
    Grid,
    Instance,
    InstanceError,
    Metrics,
    ParseError,
    ValidationReport,
    bfs_dist,
    load_instance,
    load_map,
    parse_map,
    parse_scen,
    serialize_map,
    sum_of_loss,
    validate_solution,
)
from .pibt import PIBT, BfsDistances, PositionConstraint, pibt_step, swap_assist
from .traffic import DistanceOracle, HistoryRecord, IntegrityError, StaleOracleError, TrafficDistances, TrafficMap, ltm_dist

__version__ = "0.1.0"
