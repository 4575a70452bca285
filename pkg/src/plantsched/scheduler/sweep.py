"""Grid search over allowed harvest windows."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..errors import BudgetExceededError, InfeasibleError
from .case2 import choose_engine
from .exact import DEFAULT_MAX_NODES, solve_case1_exact
from .heuristic import HeuristicConfig, solve_case1_heuristic
from .instance import compile_instance, reachable_window
from .objectives import WindowLimit, evaluate_pairwise_objective

DEFAULT_SWEEP_RADIUS = 8


@dataclass(frozen=True)
class SweepCell:
    first_week: int
    last_week: int
    status: str  # "ok", "infeasible" or "budget"
    eq6_value: float | None
    schedule: object = None


@dataclass(frozen=True)
class SweepResult:
    best_window: WindowLimit
    schedule: object
    grid: list

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["first_week", "last_week", "eq6_value", "status"])
        for c in self.grid:
            w.writerow([c.first_week, c.last_week, "" if c.eq6_value is None else repr(c.eq6_value), c.status])


def default_ranges(schedule, radius=DEFAULT_SWEEP_RADIUS):
    span = schedule.profile.harvest_span()
    f, l_ = span
    return range(f - radius, f + radius + 1), range(l_ - radius, l_ + radius + 1)


def period_pairwise(schedule, probabilities):
    """Pairwise objective over the schedule's realised harvest periods."""
    return evaluate_pairwise_objective(schedule.profile, probabilities)


def solve_cell(table, capacity, window, engine, config, max_nodes):
    try:
        inst = compile_instance(table, capacity, window)
        eng = choose_engine(inst, engine)
        if eng == "exact":
            sched = solve_case1_exact(table, capacity, window, max_nodes=max_nodes)
        else:
            sched = solve_case1_heuristic(table, capacity, window, config=config)
    except InfeasibleError:
        return SweepCell(window.first_week, window.last_week, "infeasible", None)
    except BudgetExceededError:
        return SweepCell(window.first_week, window.last_week, "budget", None)
    return SweepCell(window.first_week, window.last_week, "ok", period_pairwise(sched, table.probabilities), sched)


def sweep_harvest_windows(table, capacity, populations=None, first_weeks=None, last_weeks=None, engine="auto",
                          config: HeuristicConfig | None = None, max_nodes=DEFAULT_MAX_NODES, threads=1):
    """Solve case 1 on every (first, last) window and keep the most consistent one.

    Cells are scored by the pairwise objective over each schedule's realised
    harvest period; ties go to the shorter window, then the earlier start.
    Default ranges are +-8 weeks around the unrestricted solution's span.
    """
    config = config or HeuristicConfig()
    if first_weeks is None or last_weeks is None:
        full = reachable_window(table)
        base = solve_cell(table, capacity, full, engine, config, max_nodes)
        if base.status != "ok":
            raise InfeasibleError("sweep infeasible: unrestricted problem has no schedule")
        fr, lr = default_ranges(base.schedule)
        first_weeks = fr if first_weeks is None else first_weeks
        last_weeks = lr if last_weeks is None else last_weeks
    windows = [WindowLimit(f, l_) for f in first_weeks for l_ in last_weeks if f <= l_]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grid = list(pool.map(lambda w: solve_cell(table, capacity, w, engine, config, max_nodes), windows))
    else:
        grid = [solve_cell(table, capacity, w, engine, config, max_nodes) for w in windows]
    ok = [c for c in grid if c.status == "ok"]
    if not ok:
        raise InfeasibleError("sweep infeasible: every window cell is infeasible")
    best = min(ok, key=lambda c: (c.eq6_value, c.last_week - c.first_week, c.first_week))
    return SweepResult(WindowLimit(best.first_week, best.last_week), best.schedule, grid)
