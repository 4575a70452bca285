"""Array form of a scheduling instance, shared by the solvers.

A planting day is an *option* for a population when it is harvestable in
every scenario and every harvest week falls inside the window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InfeasibleError, ValidationError
from ..harvest import UNHARVESTABLE, HarvestTable
from .objectives import (
    HarvestProfile,
    WindowLimit,
    evaluate_case1_objective,
    evaluate_pairwise_objective,
)


@dataclass(eq=False)
class CompiledInstance:
    table: HarvestTable
    window: WindowLimit
    capacity: int
    opt_start: np.ndarray  # (n + 1,) offsets into the option arrays
    opt_day: np.ndarray  # (n_opt,)
    opt_week: np.ndarray  # (n_opt, S) week index relative to window.first_week
    qty: np.ndarray
    probs: np.ndarray
    uniform: bool
    # day -> local option index lookup, flattened per population
    lookup_start: np.ndarray = field(default=None)
    lookup_first_day: np.ndarray = field(default=None)
    lookup: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return len(self.qty)

    @property
    def n_weeks(self) -> int:
        return self.window.n_weeks

    @property
    def n_scenarios(self) -> int:
        return len(self.probs)

    def n_options(self, i: int) -> int:
        return int(self.opt_start[i + 1] - self.opt_start[i])

    def option_days(self, i: int) -> np.ndarray:
        return self.opt_day[self.opt_start[i] : self.opt_start[i + 1]]

    def days_of(self, choice) -> np.ndarray:
        return self.opt_day[self.opt_start[:-1] + np.asarray(choice, dtype=np.int64)]

    def loads_of(self, choice) -> np.ndarray:
        loads = np.zeros((self.n_scenarios, self.n_weeks), dtype=np.int64)
        rows = self.opt_start[:-1] + np.asarray(choice, dtype=np.int64)
        for s in range(self.n_scenarios):
            np.add.at(loads[s], self.opt_week[rows, s], self.qty)
        return loads

    def choice_of_days(self, days) -> np.ndarray:
        out = np.empty(self.n, dtype=np.int64)
        for i, d in enumerate(days):
            hits = np.flatnonzero(self.option_days(i) == d)
            if hits.size == 0:
                raise ValidationError(f"day {d} is not an admissible option for population {self.table.population_ids[i]!r}")
            out[i] = hits[0]
        return out


def admissible_days(table: HarvestTable, i: int) -> np.ndarray:
    """Planting days of population ``i`` harvestable in all scenarios."""
    ok = np.all(table.weeks[i] != UNHARVESTABLE, axis=1)
    return table.days[i][ok]


def reachable_window(table: HarvestTable) -> WindowLimit:
    """Smallest window containing every harvest week of every admissible option."""
    lo, hi = None, None
    for i in range(table.n_populations):
        ok = np.all(table.weeks[i] != UNHARVESTABLE, axis=1)
        if not ok.any():
            raise InfeasibleError(
                f"population {table.population_ids[i]!r} is unharvestable on every planting day "
                "in at least one scenario"
            )
        w = table.weeks[i][ok]
        lo = int(w.min()) if lo is None else min(lo, int(w.min()))
        hi = int(w.max()) if hi is None else max(hi, int(w.max()))
    if lo is None:
        raise ValidationError("no populations to schedule")
    return WindowLimit(lo, hi)


def compile_instance(table: HarvestTable, capacity, window: WindowLimit | None = None) -> CompiledInstance:
    """Filter options by harvestability and window; raise if a population has none."""
    if window is None:
        window = reachable_window(table)
    n = table.n_populations
    starts = [0]
    days, weeks = [], []
    lk_start, lk_first, lk = [0], [], []
    for i in range(n):
        w = table.weeks[i]
        ok = np.all(w != UNHARVESTABLE, axis=1)
        if not ok.any():
            raise InfeasibleError(
                f"population {table.population_ids[i]!r} is unharvestable on every planting day "
                "in at least one scenario"
            )
        ok &= np.all((w >= window.first_week) & (w <= window.last_week), axis=1)
        if not ok.any():
            raise InfeasibleError(
                f"population {table.population_ids[i]!r} cannot be harvested inside weeks "
                f"{window.first_week}..{window.last_week}"
            )
        days.append(table.days[i][ok])
        weeks.append(w[ok] - window.first_week)
        starts.append(starts[-1] + int(ok.sum()))
        local = np.full(len(table.days[i]), -1, dtype=np.int64)
        local[ok] = np.arange(int(ok.sum()))
        lk.append(local)
        lk_first.append(int(table.days[i][0]))
        lk_start.append(lk_start[-1] + len(local))
    s = table.n_scenarios
    return CompiledInstance(
        table=table,
        window=window,
        capacity=int(capacity),
        opt_start=np.array(starts, dtype=np.int64),
        opt_day=np.concatenate(days).astype(np.int64) if days else np.zeros(0, np.int64),
        opt_week=np.ascontiguousarray(np.concatenate(weeks).astype(np.int64)) if weeks else np.zeros((0, s), np.int64),
        qty=np.ascontiguousarray(table.quantities, dtype=np.int64),
        probs=np.ascontiguousarray(table.probabilities, dtype=np.float64),
        uniform=bool(np.all(table.probabilities == table.probabilities[0])),
        lookup_start=np.array(lk_start, dtype=np.int64),
        lookup_first_day=np.array(lk_first, dtype=np.int64),
        lookup=np.concatenate(lk).astype(np.int64) if lk else np.zeros(0, np.int64),
    )


@dataclass(frozen=True, eq=False)
class PlantingSchedule:
    """One planting day per population plus the resulting objectives.

    ``assignment`` maps population id to planting day. ``window`` is the
    window the harvests were confined to; objectives are taken over each
    scenario's realised harvest period.
    """

    assignment: dict
    days: np.ndarray
    profile: HarvestProfile
    window: WindowLimit
    capacity: int | None
    objective_case1: float | None
    pairwise_objective: float
    max_capacity_used: int
    engine: str = ""
    nodes: int = 0

    def weekly_profiles(self):
        return [self.profile.weekly(s) for s in range(self.profile.n_scenarios)]


def profile_from_days(table: HarvestTable, days) -> HarvestProfile:
    """Weekly harvest per scenario straight from the raw table (no option filtering)."""
    weekly = [dict() for _ in range(table.n_scenarios)]
    for i, d in enumerate(days):
        k = int(d) - int(table.days[i][0])
        if not 0 <= k < len(table.days[i]):
            raise ValidationError(f"day {d} outside window of population {table.population_ids[i]!r}")
        for s in range(table.n_scenarios):
            w = int(table.weeks[i][k, s])
            if w == UNHARVESTABLE:
                raise InfeasibleError(
                    f"population {table.population_ids[i]!r} planted on day {d} is unharvestable in scenario {s}"
                )
            weekly[s][w] = weekly[s].get(w, 0) + int(table.quantities[i])
    return HarvestProfile.from_weekly(weekly)


def make_schedule(table: HarvestTable, days, window: WindowLimit, capacity=None, engine="", nodes=0) -> PlantingSchedule:
    days = np.asarray(days, dtype=np.int64)
    profile = profile_from_days(table, days)
    obj1 = None
    if capacity is not None:
        obj1 = evaluate_case1_objective(profile, capacity, table.probabilities)
    return PlantingSchedule(
        assignment={pid: int(d) for pid, d in zip(table.population_ids, days)},
        days=days,
        profile=profile,
        window=window,
        capacity=None if capacity is None else int(capacity),
        objective_case1=obj1,
        pairwise_objective=evaluate_pairwise_objective(profile, table.probabilities),
        max_capacity_used=profile.max_load(),
        engine=engine,
        nodes=nodes,
    )
