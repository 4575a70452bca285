"""CSV ingestion and synthetic instance generation.

History CSV::

    site,date,gdu
    0,2009-01-01,3.25

Population CSV::

    id,site,early_plant,late_plant,required_gdu,quantity
    p0001,0,2020-02-03,2020-02-20,1450.0,231

Planting columns hold ISO dates or integer indices; the choice is detected
per column. Integer index ``1`` is the configured epoch date (default
2020-01-01), so index ``k`` is day ``k - 1`` relative to that epoch.
Input may use LF or CRLF line endings; writers emit LF.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .calendar import EPOCH, SeedPopulation, date_of, day_of, validate_population
from .errors import ValidationError

HISTORY_COLUMNS = ("site", "date", "gdu")
POPULATION_COLUMNS = ("id", "site", "early_plant", "late_plant", "required_gdu", "quantity")


@dataclass(frozen=True, eq=False)
class DailyGduSeries:
    """Gap-free daily GDU values for one site starting at ``start_day``."""

    site: int
    start_day: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValidationError("GDU values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValidationError("GDU values must be finite")
        if np.any(v < 0):
            raise ValidationError(f"negative GDU at offset {int(np.argmax(v < 0))}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, DailyGduSeries):
            return NotImplemented
        return (
            self.site == other.site
            and self.start_day == other.start_day
            and np.array_equal(self.values, other.values)
        )

    @property
    def end_day(self) -> int:
        return self.start_day + len(self.values) - 1

    def dates(self):
        return [date_of(self.start_day + i) for i in range(len(self.values))]

    def slice_days(self, first: int, last: int) -> "DailyGduSeries":
        i0 = first - self.start_day
        i1 = last - self.start_day + 1
        if i0 < 0 or i1 > len(self.values) or i0 >= i1:
            raise ValidationError(f"days {first}..{last} not inside series")
        return DailyGduSeries(self.site, first, self.values[i0:i1])


def _text(source) -> io.StringIO:
    """Accept bytes, a binary/text stream, or a path-like; normalise newlines."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source).decode("utf-8-sig")
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8-sig")
    else:
        with open(source, "rb") as fh:
            data = fh.read().decode("utf-8-sig")
    return io.StringIO(data.replace("\r\n", "\n").replace("\r", "\n"))


def _reader(source, expected, column_map):
    reader = csv.reader(_text(source))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("no rows") from None
    header = [h.strip() for h in header]
    if column_map:
        header = [column_map.get(h, h) for h in header]
    missing = [c for c in expected if c not in header]
    if missing:
        raise ValidationError(f"missing columns {missing}; header was {header}")
    idx = {c: header.index(c) for c in expected}
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ValidationError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        rows.append((lineno, {c: row[i].strip() for c, i in idx.items()}))
    if not rows:
        raise ValidationError("no rows")
    return rows


def parse_gdu_history(source, column_map=None) -> list[DailyGduSeries]:
    """Parse ``site,date,gdu`` rows into one gap-free series per site.

    Rows may appear in any order; each site is sorted by date and must cover
    every day between its first and last date exactly once.
    """
    per_site: dict[int, list[tuple[dt.date, float]]] = {}
    for lineno, rec in _reader(source, HISTORY_COLUMNS, column_map):
        try:
            site = int(rec["site"])
            date = dt.date.fromisoformat(rec["date"])
            gdu = float(rec["gdu"])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: unparseable row ({exc})") from None
        if site < 0:
            raise ValidationError(f"line {lineno}: negative site {site}")
        if not math.isfinite(gdu) or gdu < 0:
            raise ValidationError(f"line {lineno}: invalid GDU {rec['gdu']!r} (must be finite and >= 0)")
        per_site.setdefault(site, []).append((date, gdu))

    out = []
    for site in sorted(per_site):
        rows = sorted(per_site[site], key=lambda r: r[0])
        for (d0, _), (d1, _) in zip(rows, rows[1:]):
            if d1 == d0:
                raise ValidationError(f"site {site}: duplicate day {d0.isoformat()}")
            if (d1 - d0).days != 1:
                expected = d0 + dt.timedelta(days=1)
                raise ValidationError(
                    f"site {site}: missing day {expected.isoformat()} expected, "
                    f"next row is {d1.isoformat()}"
                )
        start = day_of(rows[0][0])
        out.append(DailyGduSeries(site, start, np.array([g for _, g in rows])))
    return out


def _plant_column(values, lines, name, epoch):
    """Convert one planting column; integers vs ISO dates chosen by first value."""
    as_int = True
    try:
        int(values[0])
    except ValueError:
        as_int = False
    out = []
    offset = (epoch - EPOCH).days
    for v, lineno in zip(values, lines):
        try:
            if as_int:
                out.append(int(v) - 1 + offset)
            else:
                out.append(day_of(dt.date.fromisoformat(v)))
        except ValueError:
            kind = "integer index" if as_int else "ISO date"
            raise ValidationError(f"line {lineno}: {name} {v!r} is not an {kind} like the rest of the column") from None
    return out


def parse_populations(source, epoch: dt.date = EPOCH, column_map=None) -> list[SeedPopulation]:
    rows = _reader(source, POPULATION_COLUMNS, column_map)
    lines = [ln for ln, _ in rows]
    early = _plant_column([r["early_plant"] for _, r in rows], lines, "early_plant", epoch)
    late = _plant_column([r["late_plant"] for _, r in rows], lines, "late_plant", epoch)
    pops, problems, seen = [], [], set()
    for (lineno, rec), e, l_ in zip(rows, early, late):
        try:
            pop = validate_population(
                {
                    "id": rec["id"],
                    "site": rec["site"],
                    "earliest_plant": e,
                    "latest_plant": l_,
                    "required_gdu": rec["required_gdu"],
                    "harvest_quantity": rec["quantity"],
                }
            )
        except ValidationError as exc:
            problems.extend(f"line {lineno}: {p}" for p in exc.problems)
            continue
        if pop.id in seen:
            problems.append(f"line {lineno}: duplicate population id {pop.id!r}")
        seen.add(pop.id)
        pops.append(pop)
    if problems:
        raise ValidationError(problems)
    return pops


def write_gdu_history(series_list, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for series in series_list:
        for i, v in enumerate(series.values):
            w.writerow([series.site, date_of(series.start_day + i).isoformat(), repr(float(v))])


def write_populations(pops, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POPULATION_COLUMNS)
    for p in pops:
        w.writerow(
            [
                p.id,
                p.site,
                date_of(p.earliest_plant).isoformat(),
                date_of(p.latest_plant).isoformat(),
                repr(float(p.required_gdu)),
                p.harvest_quantity,
            ]
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic challenge-like instance.

    Daily GDU follows ``mean - amplitude * cos(2*pi*(doy - 15)/365.25)``
    (coldest mid-January, warmest mid-July) plus Gaussian noise, floored at 0.
    """

    population_count: int = 500
    quantity_mean: float = 250.0
    quantity_sd: float = 100.0
    gdu_seasonal_amplitude: float = 9.0
    gdu_seasonal_mean: float = 10.0
    gdu_noise_sd: float = 1.5
    window_width_range: tuple[int, int] = (1, 30)
    required_gdu_range: tuple[float, float] = (1000.0, 1600.0)
    rng_seed: int = 0
    site: int = 0
    history_start: dt.date = dt.date(2009, 1, 1)
    history_end: dt.date = dt.date(2019, 12, 31)
    # Earliest planting days are drawn uniformly from this inclusive range.
    plant_start_range: tuple[int, int] = (0, 364)

    def __post_init__(self):
        problems = []
        if self.population_count < 0:
            problems.append("population_count must be >= 0")
        if self.quantity_sd < 0:
            problems.append("quantity_sd must be >= 0")
        if self.gdu_noise_sd < 0:
            problems.append("gdu_noise_sd must be >= 0")
        lo, hi = self.window_width_range
        if not 1 <= lo <= hi:
            problems.append("window_width_range must satisfy 1 <= lo <= hi")
        lo, hi = self.required_gdu_range
        if not 0 <= lo <= hi:
            problems.append("required_gdu_range must satisfy 0 <= lo <= hi")
        lo, hi = self.plant_start_range
        if lo > hi:
            problems.append("plant_start_range is empty")
        if self.history_end < self.history_start:
            problems.append("history_end precedes history_start")
        if problems:
            raise ValidationError(problems, context="synthetic spec")

    def to_dict(self):
        d = asdict(self)
        d["history_start"] = self.history_start.isoformat()
        d["history_end"] = self.history_end.isoformat()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("history_start", "history_end"):
            if isinstance(d.get(key), str):
                d[key] = dt.date.fromisoformat(d[key])
        for key in ("window_width_range", "required_gdu_range", "plant_start_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


CASE_PRESETS = {
    1: {"quantity_mean": 250.0, "quantity_sd": 100.0},
    2: {"quantity_mean": 350.0, "quantity_sd": 150.0},
}


def seasonal_gdu(days, spec: SyntheticSpec, noise=None) -> np.ndarray:
    """Seasonal GDU curve for day indices, optionally with additive noise, floored at 0."""
    days = np.asarray(days, dtype=np.int64)
    doy = np.array([date_of(int(d)).timetuple().tm_yday for d in days], dtype=np.float64)
    v = spec.gdu_seasonal_mean - spec.gdu_seasonal_amplitude * np.cos(2 * np.pi * (doy - 15.0) / 365.25)
    if noise is not None:
        v = v + noise
    return np.maximum(v, 0.0)


def generate_synthetic_instance(spec: SyntheticSpec):
    """Return ``(history, populations)``; a pure function of ``spec``."""
    rng = np.random.default_rng(spec.rng_seed)
    start = day_of(spec.history_start)
    end = day_of(spec.history_end)
    days = np.arange(start, end + 1)
    noise = rng.normal(0.0, spec.gdu_noise_sd, size=len(days)) if spec.gdu_noise_sd > 0 else None
    history = DailyGduSeries(spec.site, start, seasonal_gdu(days, spec, noise))

    n = spec.population_count
    q = rng.normal(spec.quantity_mean, spec.quantity_sd, size=n) if spec.quantity_sd > 0 else np.full(n, spec.quantity_mean)
    q = np.rint(np.maximum(q, 1.0)).astype(np.int64)
    lo, hi = spec.plant_start_range
    early = rng.integers(lo, hi + 1, size=n)
    wlo, whi = spec.window_width_range
    width = rng.integers(wlo, whi + 1, size=n)
    rlo, rhi = spec.required_gdu_range
    req = np.round(rng.uniform(rlo, rhi, size=n), 1)
    digits = max(4, len(str(n)))
    pops = [
        SeedPopulation(
            id=f"p{i:0{digits}d}",
            site=spec.site,
            earliest_plant=int(early[i]),
            latest_plant=int(early[i] + width[i] - 1),
            required_gdu=float(req[i]),
            harvest_quantity=int(q[i]),
        )
        for i in range(n)
    ]
    return history, pops
