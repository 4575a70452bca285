"""Calendar arithmetic and the validated domain entities.

Day indices count real calendar days from the epoch 2020-01-01 (day 0).
Weeks run Sunday to Saturday; week 1 is the week containing the epoch,
i.e. 2019-12-29 .. 2020-01-04, so every week has exactly seven days.
Days before 2019-12-29 map to week 0 and below.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import CalendarRangeError, ValidationError

EPOCH = dt.date(2020, 1, 1)
HORIZON_DAYS = 730
# 2020-01-01 is a Wednesday, three days after the Sunday that opens week 1.
_EPOCH_WEEKDAY_OFFSET = 3
MIN_DATE = dt.date(2000, 1, 1)
MAX_DATE = dt.date(2039, 12, 31)
MIN_DAY = (MIN_DATE - EPOCH).days
MAX_DAY = (MAX_DATE - EPOCH).days


def _check_day(day):
    if not MIN_DAY <= day <= MAX_DAY:
        raise CalendarRangeError(
            f"day {day} outside supported range [{MIN_DAY}, {MAX_DAY}] "
            f"({MIN_DATE.isoformat()} .. {MAX_DATE.isoformat()})"
        )


def day_of(date: dt.date) -> int:
    day = (date - EPOCH).days
    _check_day(day)
    return day


def date_of(day: int) -> dt.date:
    _check_day(day)
    return EPOCH + dt.timedelta(days=int(day))


def parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def week_of(day: int) -> int:
    """1-based Sunday-Saturday week index of a day index."""
    if isinstance(day, (bool, np.bool_)) or int(day) != day:
        raise CalendarRangeError(f"day index must be an integer, got {day!r}")
    day = int(day)
    _check_day(day)
    return (day + _EPOCH_WEEKDAY_OFFSET) // 7 + 1


def weeks_of(days) -> np.ndarray:
    """Vectorised ``week_of`` (range-checked)."""
    days = np.asarray(days, dtype=np.int64)
    if days.size and (days.min() < MIN_DAY or days.max() > MAX_DAY):
        raise CalendarRangeError("day index outside supported calendar range")
    return (days + _EPOCH_WEEKDAY_OFFSET) // 7 + 1


def first_day_of_week(week: int) -> int:
    return (int(week) - 1) * 7 - _EPOCH_WEEKDAY_OFFSET


@dataclass(frozen=True)
class WeekMembership:
    """Dense day -> week table over ``[start_day, start_day + len(weeks))``."""

    start_day: int
    weeks: np.ndarray

    @classmethod
    def for_horizon(cls, start_day: int = 0, n_days: int = HORIZON_DAYS) -> "WeekMembership":
        days = np.arange(start_day, start_day + n_days, dtype=np.int64)
        weeks = weeks_of(days)
        weeks.setflags(write=False)
        return cls(int(start_day), weeks)

    @property
    def end_day(self) -> int:
        return self.start_day + len(self.weeks) - 1

    def __getitem__(self, day: int) -> int:
        i = int(day) - self.start_day
        if not 0 <= i < len(self.weeks):
            raise CalendarRangeError(f"day {day} outside membership table")
        return int(self.weeks[i])

    def is_member(self, week: int, day: int) -> bool:
        return self[day] == week


@dataclass(frozen=True)
class SiteCapacity:
    site: int
    capacity: int

    def __post_init__(self):
        problems = []
        if self.site < 0:
            problems.append("site must be non-negative")
        if self.capacity < 1:
            problems.append("capacity must be >= 1")
        if problems:
            raise ValidationError(problems)


# Challenge capacities for case 1.
DEFAULT_CAPACITIES = {0: 7500, 1: 6000}


@dataclass(frozen=True)
class SeedPopulation:
    """One breeding lot. Planting days are inclusive day indices."""

    id: str
    site: int
    earliest_plant: int
    latest_plant: int
    required_gdu: float
    harvest_quantity: int

    @property
    def window(self) -> range:
        return range(self.earliest_plant, self.latest_plant + 1)


def _as_int(value, name, problems):
    try:
        if isinstance(value, str):
            value = value.strip()
            f = float(value)
        else:
            f = float(value)
    except (TypeError, ValueError):
        problems.append(f"{name} is not a number: {value!r}")
        return None
    if not math.isfinite(f) or f != int(f):
        problems.append(f"{name} must be an integer, got {value!r}")
        return None
    return int(f)


def _as_float(value, name, problems):
    try:
        f = float(value.strip() if isinstance(value, str) else value)
    except (TypeError, ValueError):
        problems.append(f"{name} is not a number: {value!r}")
        return None
    if not math.isfinite(f):
        problems.append(f"{name} must be finite, got {value!r}")
        return None
    return f


def validate_population(raw) -> SeedPopulation:
    """Build a ``SeedPopulation`` from a mapping, reporting every violation.

    Accepts keys ``id, site, earliest_plant, latest_plant, required_gdu,
    harvest_quantity``; the short aliases ``E, L, R, H`` are also understood.
    """
    aliases = {
        "E": "earliest_plant",
        "L": "latest_plant",
        "R": "required_gdu",
        "H": "harvest_quantity",
        "early_plant": "earliest_plant",
        "late_plant": "latest_plant",
        "quantity": "harvest_quantity",
    }
    rec = {aliases.get(k, k): v for k, v in dict(raw).items()}
    problems = []
    for key in ("earliest_plant", "latest_plant", "required_gdu", "harvest_quantity"):
        if key not in rec:
            problems.append(f"missing field {key}")
    if problems:
        raise ValidationError(problems)

    pid = str(rec.get("id", ""))
    site = _as_int(rec.get("site", 0), "site", problems)
    e = _as_int(rec["earliest_plant"], "earliest_plant", problems)
    l_ = _as_int(rec["latest_plant"], "latest_plant", problems)
    r = _as_float(rec["required_gdu"], "required_gdu", problems)
    h = _as_int(rec["harvest_quantity"], "harvest_quantity", problems)

    if site is not None and site < 0:
        problems.append(f"site must be non-negative, got {site}")
    if e is not None and l_ is not None and e > l_:
        problems.append(f"window inverted: earliest_plant {e} > latest_plant {l_}")
    if r is not None and r < 0:
        problems.append(f"negative required GDU: {r}")
    if h is not None and h < 1:
        problems.append(f"non-positive quantity: {h}")
    for name, d in (("earliest_plant", e), ("latest_plant", l_)):
        if d is not None and not MIN_DAY <= d <= MAX_DAY:
            problems.append(f"{name} {d} outside supported calendar range")
    if problems:
        raise ValidationError(problems, context=f"population {pid!r}" if pid else None)
    return SeedPopulation(pid, site, e, l_, r, h)
