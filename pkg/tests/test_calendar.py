import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plantsched.calendar import (
    MAX_DAY,
    MIN_DAY,
    WeekMembership,
    SiteCapacity,
    date_of,
    day_of,
    first_day_of_week,
    validate_population,
    week_of,
    weeks_of,
)
from plantsched.errors import CalendarRangeError, ValidationError


def test_week_one_contains_epoch():
    assert week_of(day_of(dt.date(2020, 1, 1))) == 1


def test_sunday_starts_new_week():
    assert week_of(day_of(dt.date(2020, 1, 4))) == 1
    assert week_of(day_of(dt.date(2020, 1, 5))) == 2
    assert week_of(day_of(dt.date(2020, 1, 12))) == 3


def test_week_one_starts_on_sunday_before_epoch():
    assert date_of(first_day_of_week(1)) == dt.date(2019, 12, 29)
    assert week_of(day_of(dt.date(2019, 12, 29))) == 1
    assert week_of(day_of(dt.date(2019, 12, 28))) == 0


def test_weeks_match_isoweekday_count():
    # independent count of Sundays since 2019-12-29
    for d in range(-40, 800):
        date = date_of(d)
        sundays = (date - dt.date(2019, 12, 29)).days // 7
        assert week_of(d) == sundays + 1
        if date.isoweekday() == 7 and d > MIN_DAY:
            assert week_of(d) == week_of(d - 1) + 1


def test_leap_day_is_ordinary():
    assert day_of(dt.date(2020, 3, 1)) - day_of(dt.date(2020, 2, 28)) == 2


@given(st.integers(MIN_DAY, MAX_DAY - 7))
def test_week_advances_every_seven_days(d):
    assert week_of(d + 7) == week_of(d) + 1


@given(st.integers(MIN_DAY, MAX_DAY - 7))
def test_seven_days_per_week(d):
    w = week_of(d)
    first = first_day_of_week(w)
    assert first <= d <= first + 6
    assert all(week_of(x) == w for x in range(max(first, MIN_DAY), min(first + 7, MAX_DAY + 1)))


def test_out_of_range_day():
    with pytest.raises(CalendarRangeError):
        week_of(MAX_DAY + 1)
    with pytest.raises(CalendarRangeError):
        weeks_of([0, MIN_DAY - 1])


def test_vectorised_matches_scalar():
    days = np.arange(-500, 900)
    assert np.array_equal(weeks_of(days), [week_of(int(d)) for d in days])


def test_membership_table():
    m = WeekMembership.for_horizon()
    assert len(m.weeks) == 730
    assert m[0] == 1 and m[4] == 2
    assert m.is_member(2, 4)
    with pytest.raises(CalendarRangeError):
        m[730]


def test_validate_population_ok():
    p = validate_population({"id": "a", "E": 10, "L": 20, "R": 500, "H": 250})
    assert (p.earliest_plant, p.latest_plant, p.required_gdu, p.harvest_quantity) == (10, 20, 500.0, 250)


def test_validate_population_inverted_window():
    with pytest.raises(ValidationError, match="window inverted"):
        validate_population({"id": "a", "E": 20, "L": 10, "R": 500, "H": 250})


def test_validate_population_degenerate_window():
    p = validate_population({"id": "a", "E": 10, "L": 10, "R": 0, "H": 1})
    assert list(p.window) == [10]


def test_validate_population_lists_every_problem():
    with pytest.raises(ValidationError) as exc:
        validate_population({"id": "a", "E": 20, "L": 10, "R": -1, "H": 0})
    assert len(exc.value.problems) == 3


@given(
    st.integers(-1000, 1000),
    st.integers(-1000, 1000),
    st.floats(-10, 3000, allow_nan=False),
    st.integers(-5, 500),
    st.integers(-2, 3),
)
def test_validated_populations_satisfy_invariants(e, l_, r, h, site):
    raw = {"id": "x", "site": site, "E": e, "L": l_, "R": r, "H": h}
    try:
        p = validate_population(raw)
    except ValidationError:
        assert e > l_ or r < 0 or h < 1 or site < 0
        return
    assert p.earliest_plant <= p.latest_plant
    assert p.required_gdu >= 0 and p.harvest_quantity >= 1 and p.site >= 0


def test_site_capacity():
    assert SiteCapacity(0, 7500).capacity == 7500
    with pytest.raises(ValidationError):
        SiteCapacity(0, 0)
