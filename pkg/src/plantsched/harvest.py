"""Planting day -> harvest day/week via GDU accumulation.

A population planted on day ``t`` is harvested on the first day ``t' > t``
for which the GDUs of days ``t .. t'-1`` reach its requirement, provided
``t'`` still lies inside the scenario. A zero requirement harvests on the
planting day itself.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _accel
from .calendar import weeks_of
from .errors import ValidationError

UNHARVESTABLE = -1


def harvest_day(plant: int, required_gdu: float, scenario) -> int | None:
    """Harvest day index for one planting, or ``None`` if never reached."""
    values = np.asarray(scenario.values)
    i = plant - scenario.start_day
    if not 0 <= i < len(values):
        raise ValidationError(f"plant day {plant} outside scenario {scenario.start_day}..{scenario.end_day}")
    off = _harvest_offsets(values[None, :], np.array([i], dtype=np.int64), np.array([float(required_gdu)]))[0, 0]
    return None if off < 0 else scenario.start_day + int(off)


@_accel.njit
def _harvest_offsets_loop(values, plant_idx, required):
    """values (S, n); plant_idx (m,); required (m,) -> offsets (m, S), -1 if unharvestable."""
    n_s, n = values.shape
    m = plant_idx.shape[0]
    out = np.full((m, n_s), -1, dtype=np.int64)
    for k in range(m):
        t = plant_idx[k]
        r = required[k]
        for s in range(n_s):
            if r <= 0.0:
                out[k, s] = t
                continue
            acc = 0.0
            for j in range(t, n - 1):
                acc += values[s, j]
                if acc >= r:
                    out[k, s] = j + 1
                    break
    return out


def _harvest_offsets_numpy(values, plant_idx, required):
    n_s, n = values.shape
    out = np.full((len(plant_idx), n_s), -1, dtype=np.int64)
    by_day: dict[int, list[int]] = {}
    for k, t in enumerate(plant_idx):
        by_day.setdefault(int(t), []).append(k)
    for t, ks in by_day.items():
        ks = np.asarray(ks)
        r = required[ks]
        zero = r <= 0.0
        out[ks[zero], :] = t
        if zero.all() or t >= n - 1:
            continue
        # add.accumulate is sequential, so these equal the running sums of the loop kernel
        acc = np.add.accumulate(values[:, t : n - 1], axis=1)
        for s in range(n_s):
            pos = np.searchsorted(acc[s], r[~zero], side="left")
            hit = pos < acc.shape[1]
            off = np.where(hit, t + pos + 1, -1)
            out[ks[~zero], s] = off
    return out


def _harvest_offsets(values, plant_idx, required):
    values = np.ascontiguousarray(values, dtype=np.float64)
    plant_idx = np.ascontiguousarray(plant_idx, dtype=np.int64)
    required = np.ascontiguousarray(required, dtype=np.float64)
    if _accel.NUMBA_ENABLED:
        return _harvest_offsets_loop(values, plant_idx, required)
    return _harvest_offsets_numpy(values, plant_idx, required)


@dataclass(frozen=True, eq=False)
class HarvestTable:
    """Harvest outcome of every (population, planting day, scenario) triple.

    For population ``i`` the planting days are ``days[i]`` (its whole window)
    and ``harvest_days[i]`` / ``weeks[i]`` are ``(len(days[i]), S)`` arrays
    holding ``-1`` for unharvestable triples. ``quantities[i]`` is the
    population's ear count, harvested in full in its harvest week.
    """

    population_ids: tuple
    quantities: np.ndarray
    days: tuple
    harvest_days: tuple
    weeks: tuple
    probabilities: np.ndarray
    literal_violations: int = 0

    @property
    def n_populations(self) -> int:
        return len(self.population_ids)

    @property
    def n_scenarios(self) -> int:
        return len(self.probabilities)

    def __len__(self):
        return sum(w.size for w in self.weeks)

    def lookup(self, i: int, day: int, s: int):
        """``(harvest_week, quantity)`` or ``None`` when unharvestable."""
        k = day - int(self.days[i][0])
        if not 0 <= k < len(self.days[i]):
            raise KeyError((i, day, s))
        w = int(self.weeks[i][k, s])
        if w == UNHARVESTABLE:
            return None
        return w, int(self.quantities[i])

    def entries(self):
        """Yield ``(i, day, s, week, quantity)`` for harvestable triples."""
        for i in range(self.n_populations):
            q = int(self.quantities[i])
            for k, day in enumerate(self.days[i]):
                for s in range(self.n_scenarios):
                    w = int(self.weeks[i][k, s])
                    if w != UNHARVESTABLE:
                        yield i, int(day), s, w, q

    def unharvestable(self):
        for i in range(self.n_populations):
            for k, day in enumerate(self.days[i]):
                for s in np.flatnonzero(self.weeks[i][k] == UNHARVESTABLE):
                    yield i, int(day), int(s)

    def dump_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["population", "plant_day", "scenario", "harvest_week", "quantity"])
        for i, day, s, week, q in self.entries():
            w.writerow([self.population_ids[i], day, s, week, q])


def _scenario_matrix(scenarios):
    starts = {sc.start_day for sc in scenarios}
    lengths = {len(sc) for sc in scenarios}
    if len(starts) != 1 or len(lengths) != 1:
        raise ValidationError("all scenarios must share start day and length")
    return starts.pop(), np.vstack([np.asarray(sc.values) for sc in scenarios])


def build_harvest_table(populations, scenarios, probabilities=None, membership=None) -> HarvestTable:
    """Evaluate every planting day of every window under every scenario.

    ``scenarios`` is a sequence of ``DailyGduSeries`` sharing one span;
    ``probabilities`` defaults to uniform. Harvest days map to weeks through
    ``membership`` (a ``WeekMembership``) when given, else through ``week_of``.
    """
    if not scenarios:
        raise ValidationError("at least one scenario is required")
    start, values = _scenario_matrix(scenarios)
    n_s, n = values.shape
    if probabilities is None:
        probabilities = np.full(n_s, 1.0 / n_s)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.shape != (n_s,):
        raise ValidationError("one probability per scenario is required")

    plant_idx, required, owner = [], [], []
    for i, p in enumerate(populations):
        if p.earliest_plant < start or p.latest_plant > start + n - 1:
            raise ValidationError(
                f"population {p.id!r}: window {p.earliest_plant}..{p.latest_plant} "
                f"not inside scenarios {start}..{start + n - 1}"
            )
        k = p.latest_plant - p.earliest_plant + 1
        plant_idx.append(np.arange(p.earliest_plant - start, p.latest_plant - start + 1))
        required.append(np.full(k, float(p.required_gdu)))
        owner.append(np.full(k, i))
    if populations:
        plant_idx = np.concatenate(plant_idx)
        required = np.concatenate(required)
        owner = np.concatenate(owner)
    else:
        plant_idx = np.zeros(0, np.int64)
        required = np.zeros(0)
        owner = np.zeros(0, np.int64)

    offsets = _harvest_offsets(values, plant_idx, required)
    hdays = np.where(offsets >= 0, offsets + start, UNHARVESTABLE)
    safe_days = np.where(offsets >= 0, hdays, start)
    if membership is not None:
        idx = safe_days - membership.start_day
        if idx.size and (idx.min() < 0 or idx.max() >= len(membership.weeks)):
            raise ValidationError("membership table does not cover every harvest day")
        mapped = np.asarray(membership.weeks)[idx] if idx.size else idx
    else:
        mapped = weeks_of(safe_days)
    weeks = np.where(offsets >= 0, mapped, UNHARVESTABLE)

    # Count triples where the literal overshoot bound (indexed at the planting day) fails.
    violations = 0
    ok = offsets >= 0
    if ok.any():
        cums = np.concatenate([np.zeros((n_s, 1)), np.add.accumulate(values, axis=1)], axis=1)
        rows, cols = np.nonzero(ok)
        t = plant_idx[rows]
        total = cums[cols, offsets[rows, cols]] - cums[cols, t]
        violations = int(np.sum(total - required[rows] > values[cols, t] + 1e-9))

    bounds = np.concatenate([[0], np.cumsum([p.latest_plant - p.earliest_plant + 1 for p in populations])]).astype(int)
    days_t, hd_t, wk_t = [], [], []
    for i, p in enumerate(populations):
        a, b = bounds[i], bounds[i + 1]
        d = np.arange(p.earliest_plant, p.latest_plant + 1, dtype=np.int64)
        for arr in (d, hdays[a:b], weeks[a:b]):
            arr.setflags(write=False)
        days_t.append(d)
        hd_t.append(np.ascontiguousarray(hdays[a:b]))
        wk_t.append(np.ascontiguousarray(weeks[a:b]))
    return HarvestTable(
        population_ids=tuple(p.id for p in populations),
        quantities=np.array([p.harvest_quantity for p in populations], dtype=np.int64),
        days=tuple(days_t),
        harvest_days=tuple(hd_t),
        weeks=tuple(wk_t),
        probabilities=probabilities,
        literal_violations=violations,
    )
