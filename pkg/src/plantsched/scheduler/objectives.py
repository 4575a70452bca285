"""Weekly harvest profiles and the two scheduling objectives.

Expectations over scenarios are computed as ``sum(v) / S`` when the
probabilities are uniform, so that mathematically equal objective values
are also bitwise equal; otherwise as ``sum_s P_s * v_s`` in scenario order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, ValidationError


@dataclass(frozen=True)
class WindowLimit:
    first_week: int
    last_week: int

    def __post_init__(self):
        if self.first_week > self.last_week:
            raise ValidationError(f"window first_week {self.first_week} > last_week {self.last_week}")

    @property
    def n_weeks(self) -> int:
        return self.last_week - self.first_week + 1

    def __contains__(self, week) -> bool:
        return self.first_week <= week <= self.last_week


@dataclass(frozen=True, eq=False)
class HarvestProfile:
    """Ears harvested per scenario and week; ``loads[s, k]`` is week ``first_week + k``."""

    first_week: int
    loads: np.ndarray

    @property
    def last_week(self) -> int:
        return self.first_week + self.loads.shape[1] - 1

    @property
    def n_scenarios(self) -> int:
        return self.loads.shape[0]

    def weekly(self, s: int) -> dict[int, int]:
        return {self.first_week + k: int(v) for k, v in enumerate(self.loads[s])}

    def restricted(self, window: WindowLimit) -> np.ndarray:
        """Loads over the window weeks (zeros for weeks outside the profile)."""
        out = np.zeros((self.n_scenarios, window.n_weeks), dtype=np.int64)
        lo = max(window.first_week, self.first_week)
        hi = min(window.last_week, self.last_week)
        if lo <= hi:
            out[:, lo - window.first_week : hi - window.first_week + 1] = self.loads[
                :, lo - self.first_week : hi - self.first_week + 1
            ]
        return out

    def harvest_span(self) -> tuple[int, int] | None:
        """First and last week with any harvest in any scenario."""
        used = np.flatnonzero(self.loads.sum(axis=0) > 0)
        if used.size == 0:
            return None
        return self.first_week + int(used[0]), self.first_week + int(used[-1])

    def max_load(self) -> int:
        return int(self.loads.max()) if self.loads.size else 0

    def __eq__(self, other):
        return (
            isinstance(other, HarvestProfile)
            and self.first_week == other.first_week
            and np.array_equal(self.loads, other.loads)
        )

    @classmethod
    def from_weekly(cls, weekly_by_scenario) -> "HarvestProfile":
        """Build from a list of ``{week: ears}`` mappings (one per scenario)."""
        weeks = [w for d in weekly_by_scenario for w in d]
        if not weeks:
            return cls(1, np.zeros((len(weekly_by_scenario), 0), dtype=np.int64))
        lo, hi = min(weeks), max(weeks)
        loads = np.zeros((len(weekly_by_scenario), hi - lo + 1), dtype=np.int64)
        for s, d in enumerate(weekly_by_scenario):
            for w, v in d.items():
                loads[s, w - lo] += int(v)
        return cls(lo, loads)


def is_uniform(probabilities) -> bool:
    p = np.asarray(probabilities, dtype=np.float64)
    return bool(p.size) and bool(np.all(p == p[0]))


def expectation(values, probabilities) -> float:
    values = np.asarray(values)
    p = np.asarray(probabilities, dtype=np.float64)
    if values.shape != p.shape:
        raise ValidationError("one value per scenario is required")
    if is_uniform(p):
        return float(values.sum()) / len(values)
    acc = 0.0
    for s in range(len(p)):
        acc = acc + p[s] * float(values[s])
    return acc


def pairwise_abs_sum(loads) -> np.ndarray:
    """Sum of |a - b| over all week pairs, per row (exact integers)."""
    loads = np.sort(np.asarray(loads, dtype=np.int64), axis=-1)
    n = loads.shape[-1]
    coef = 2 * np.arange(n, dtype=np.int64) - n + 1
    return (loads * coef).sum(axis=-1)


def scenario_span(row) -> tuple[int, int] | None:
    """First and last local index with a nonzero load, or ``None``."""
    used = np.flatnonzero(np.asarray(row) > 0)
    if used.size == 0:
        return None
    return int(used[0]), int(used[-1])


def active_rows(profile: HarvestProfile, window=None) -> list[np.ndarray]:
    """Weekly loads of each scenario over its active window.

    Without ``window`` the active window of scenario ``s`` is its own harvest
    period, from its first to its last harvest week. Weeks outside it carry
    no harvest, so they add nothing but slack. A given ``window`` is used
    as is for every scenario.
    """
    if window is not None:
        rows = list(profile.restricted(window))
        if window.n_weeks == 0:
            raise ValidationError("empty active window")
        return rows
    rows = []
    for s, row in enumerate(profile.loads):
        span = scenario_span(row)
        if span is None:
            raise ValidationError(f"empty active window: scenario {s} has no harvest")
        rows.append(row[span[0] : span[1] + 1])
    return rows


def case1_per_scenario(profile, capacity, window=None) -> list[float]:
    return [float(capacity - int(r.min())) for r in active_rows(profile, window)]


def pairwise_per_scenario(profile, window=None) -> list[float]:
    return [float(pairwise_abs_sum(r)) for r in active_rows(profile, window)]


def evaluate_case1_objective(profile: HarvestProfile, capacity, probabilities, window=None, strict=False) -> float:
    """Expected largest weekly slack ``capacity - harvest`` over the active window.

    With ``strict`` a profile exceeding capacity raises ``InfeasibleError``.
    """
    if strict and profile.max_load() > capacity:
        raise InfeasibleError(f"weekly harvest {profile.max_load()} exceeds capacity {capacity}")
    mins = np.array([int(r.min()) for r in active_rows(profile, window)], dtype=np.int64)
    return float(capacity) - expectation(mins, probabilities)


def evaluate_pairwise_objective(profile: HarvestProfile, probabilities, window=None) -> float:
    """Expected sum of absolute weekly-harvest differences over all week pairs in the active window."""
    pws = np.array([pairwise_abs_sum(r) for r in active_rows(profile, window)], dtype=np.int64)
    return expectation(pws, probabilities)
