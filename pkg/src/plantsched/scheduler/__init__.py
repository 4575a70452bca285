"""Planting-day optimisation on a harvest table."""
from .case2 import case2_feasible, solve_case2
from .exact import solve_case1_exact
from .heuristic import HeuristicConfig, solve_case1_heuristic
from .instance import PlantingSchedule, compile_instance, make_schedule, profile_from_days, reachable_window
from .objectives import (
    HarvestProfile,
    WindowLimit,
    evaluate_case1_objective,
    evaluate_pairwise_objective,
)
from .report import evaluate_schedule
from .sweep import SweepResult, sweep_harvest_windows

__all__ = [
    "HarvestProfile",
    "HeuristicConfig",
    "PlantingSchedule",
    "SweepResult",
    "WindowLimit",
    "case2_feasible",
    "compile_instance",
    "evaluate_case1_objective",
    "evaluate_pairwise_objective",
    "evaluate_schedule",
    "make_schedule",
    "profile_from_days",
    "reachable_window",
    "solve_case1_exact",
    "solve_case1_heuristic",
    "solve_case2",
    "sweep_harvest_windows",
]
