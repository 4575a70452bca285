"""Minimum-capacity problem via binary search over the capacity."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InfeasibleError
from . import exact
from .heuristic import HeuristicConfig, find_feasible, solve_case1_heuristic
from .instance import compile_instance

# Above this many leaves in the full search tree "auto" switches to the heuristic.
AUTO_EXACT_LIMIT = 1e6


def choose_engine(inst, engine="auto"):
    if engine != "auto":
        return engine
    log_leaves = float(np.sum(np.log(np.diff(inst.opt_start).astype(float))))
    return "exact" if log_leaves <= math.log(AUTO_EXACT_LIMIT) else "heuristic"


def solve_case2(table, populations=None, window=None, engine="auto", config: HeuristicConfig | None = None,
                max_nodes=exact.DEFAULT_MAX_NODES):
    """Return ``(z_star, schedule)``.

    ``z_star`` is the smallest capacity for which a schedule exists (exact
    engine) or the smallest capacity the heuristic could certify. The
    schedule is the case-1 solution at that capacity, so its largest weekly
    harvest equals ``z_star`` in exact mode.
    """
    config = config or HeuristicConfig()
    total = int(table.quantities.sum())
    inst = compile_instance(table, total, window)
    engine = choose_engine(inst, engine)
    lo = int(inst.qty.max())
    hi = total

    if engine == "exact":
        def feasible(z):
            try:
                exact.search(inst, z, feasibility_only=True, max_nodes=max_nodes)
                return True
            except InfeasibleError:
                return False
    else:
        start = find_feasible(inst, hi, config)
        hi = int(inst.loads_of(start).max())
        witness = {hi: start}

        def feasible(z):
            ch = find_feasible(inst, z, config)
            if ch is not None:
                witness[z] = ch
            return ch is not None

    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    z_star = lo
    if engine == "exact":
        sched = exact.solve_case1_exact(table, z_star, inst.window, max_nodes=max_nodes)
    else:
        # start from the certifying choice so the re-solve cannot lose feasibility
        sched = solve_case1_heuristic(table, z_star, inst.window, config=config, start=witness[z_star])
    return z_star, sched


def case2_feasible(table, capacity, window=None, max_nodes=exact.DEFAULT_MAX_NODES) -> bool:
    """Exact feasibility test for one capacity."""
    inst = compile_instance(table, capacity, window)
    try:
        exact.search(inst, capacity, feasibility_only=True, max_nodes=max_nodes)
        return True
    except InfeasibleError:
        return False
