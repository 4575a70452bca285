import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import naive_harvest_day
from plantsched import _accel
from plantsched.calendar import SeedPopulation, WeekMembership, week_of
from plantsched.errors import ValidationError
from plantsched.harvest import (
    UNHARVESTABLE,
    _harvest_offsets_loop,
    _harvest_offsets_numpy,
    build_harvest_table,
    harvest_day,
)
from plantsched.ingest import DailyGduSeries

CONST10 = DailyGduSeries(0, 0, np.full(100, 10.0))


def test_constant_rate_examples():
    assert harvest_day(5, 25, CONST10) == 8
    assert harvest_day(5, 30, CONST10) == 8  # boundary equality
    assert harvest_day(5, 30.0001, CONST10) == 9


def test_zero_requirement_harvests_on_planting_day():
    assert harvest_day(7, 0, CONST10) == 7


def test_unreachable_requirement():
    assert harvest_day(0, 1e6, CONST10) is None


def test_plant_outside_scenario():
    with pytest.raises(ValidationError):
        harvest_day(100, 5, CONST10)
    with pytest.raises(ValidationError):
        harvest_day(-1, 5, CONST10)


def test_harvest_must_fall_inside_span():
    s = DailyGduSeries(0, 0, np.full(5, 10.0))
    assert harvest_day(0, 40, s) == 4
    assert harvest_day(0, 50, s) is None


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0, 20, allow_nan=False), min_size=2, max_size=60),
    st.integers(0, 59),
    st.floats(0, 400, allow_nan=False),
    st.floats(0, 400, allow_nan=False),
)
def test_properties(values, plant, r1, r2):
    s = DailyGduSeries(0, -10, values)
    plant = -10 + plant % len(values)
    h1, h2 = harvest_day(plant, min(r1, r2), s), harvest_day(plant, max(r1, r2), s)
    assert h1 == naive_harvest_day(values, -10, plant, min(r1, r2))
    if h1 is not None:
        assert h1 >= plant and (h1 == plant) == (min(r1, r2) == 0)
    if h2 is not None:
        assert h1 is not None and h2 >= h1  # non-decreasing in the requirement


def test_later_planting_never_harvests_earlier():
    rng = np.random.default_rng(0)
    s = DailyGduSeries(0, 0, rng.uniform(0, 15, 200))
    prev = -1
    for t in range(150):
        h = harvest_day(t, 300, s)
        if h is None:
            break
        assert h >= prev
        prev = h


def test_one_entry_table():
    pop = SeedPopulation("a", 0, 3, 3, 25, 9)
    table = build_harvest_table([pop], [CONST10])
    assert len(table) == 1
    assert table.lookup(0, 3, 0) == (week_of(6), 9)


def test_table_matches_oracle():
    rng = np.random.default_rng(5)
    scen = [DailyGduSeries(0, 0, rng.uniform(0, 12, 80)) for _ in range(2)]
    pops = [SeedPopulation(f"p{i}", 0, 4 * i, 4 * i + 4, float(rng.uniform(50, 300)), 10 + i) for i in range(3)]
    table = build_harvest_table(pops, scen)
    assert len(table) == 30
    for i, p in enumerate(pops):
        for t in p.window:
            for s, sc in enumerate(scen):
                h = naive_harvest_day(sc.values, 0, t, p.required_gdu)
                got = table.lookup(i, t, s)
                assert got == (None if h is None else (week_of(h), p.harvest_quantity))


def test_unharvestable_marked():
    pops = [SeedPopulation("a", 0, 0, 1, 10_000, 5)]
    table = build_harvest_table(pops, [CONST10])
    assert list(table.unharvestable()) == [(0, 0, 0), (0, 1, 0)]
    assert np.all(table.weeks[0] == UNHARVESTABLE)


def test_membership_table_agrees():
    rng = np.random.default_rng(2)
    scen = [DailyGduSeries(0, 0, rng.uniform(5, 12, 730))]
    pops = [SeedPopulation("a", 0, 10, 40, 800, 3)]
    a = build_harvest_table(pops, scen)
    b = build_harvest_table(pops, scen, membership=WeekMembership.for_horizon())
    assert np.array_equal(a.weeks[0], b.weeks[0])


def test_window_outside_scenarios():
    with pytest.raises(ValidationError):
        build_harvest_table([SeedPopulation("a", 0, 95, 105, 10, 1)], [CONST10])


def test_dump_csv():
    table = build_harvest_table([SeedPopulation("a", 0, 0, 1, 25, 4)], [CONST10])
    buf = io.StringIO()
    table.dump_csv(buf)
    assert buf.getvalue() == (
        "population,plant_day,scenario,harvest_week,quantity\n"
        f"a,0,0,{week_of(3)},4\na,1,0,{week_of(4)},4\n"
    )


def test_literal_inequality_counter():
    # uneven GDU makes the bound indexed at the planting day fail sometimes
    s = DailyGduSeries(0, 0, np.array([1.0, 20.0, 20.0, 20.0, 1.0, 1.0]))
    table = build_harvest_table([SeedPopulation("a", 0, 0, 0, 30, 1)], [s])
    # sum over days 0..2 = 41, overshoot 11 > G[0] = 1
    assert table.literal_violations == 1


def test_kernel_paths_agree():
    rng = np.random.default_rng(9)
    values = rng.uniform(0, 15, (3, 300))
    values[1, 100:] = 0.0
    idx = rng.integers(0, 300, 400)
    req = rng.uniform(0, 900, 400)
    req[:20] = 0.0
    a = _harvest_offsets_loop(values, idx, req)
    b = _harvest_offsets_numpy(values, idx, req)
    assert np.array_equal(a, b)
    assert _accel.backend() in ("numba", "numpy")
