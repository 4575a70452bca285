import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import (
    active_min,
    active_pairwise,
    brute_case1,
    brute_min_capacity,
    small_instance,
    table_from_weeks,
)
from plantsched.errors import BudgetExceededError, InfeasibleError, ValidationError
from plantsched.harvest import HarvestTable, build_harvest_table
from plantsched.scheduler import (
    HarvestProfile,
    HeuristicConfig,
    WindowLimit,
    case2_feasible,
    evaluate_case1_objective,
    evaluate_pairwise_objective,
    evaluate_schedule,
    profile_from_days,
    reachable_window,
    solve_case1_exact,
    solve_case1_heuristic,
    solve_case2,
    sweep_harvest_windows,
)
from plantsched.scheduler.objectives import pairwise_abs_sum


def _profile(rows, first_week=1):
    return HarvestProfile(first_week, np.atleast_2d(np.asarray(rows, dtype=np.int64)))


def _small_table(seed):
    pops, scen, cap = small_instance(seed)
    return build_harvest_table(pops, scen), cap


def _subset(table, idx):
    return HarvestTable(
        population_ids=tuple(table.population_ids[i] for i in idx),
        quantities=table.quantities[list(idx)],
        days=tuple(table.days[i] for i in idx),
        harvest_days=tuple(table.harvest_days[i] for i in idx),
        weeks=tuple(table.weeks[i] for i in idx),
        probabilities=table.probabilities,
    )


def _check_schedule(table, sched, capacity=None, window=None):
    """Independent audit: one day per population inside its window, loads recomputed from raw weeks."""
    assert len(sched.days) == table.n_populations
    loads = {}
    for i, d in enumerate(sched.days):
        k = int(d) - int(table.days[i][0])
        assert 0 <= k < len(table.days[i])
        for s in range(table.n_scenarios):
            w = int(table.weeks[i][k, s])
            assert w >= 0
            if window is not None:
                assert window.first_week <= w <= window.last_week
            loads[s, w] = loads.get((s, w), 0) + int(table.quantities[i])
    if capacity is not None:
        assert max(loads.values()) <= capacity
    assert sched.max_capacity_used == max(loads.values())


# ------------------------------------------------------------- objectives


def test_case1_examples():
    assert evaluate_case1_objective(_profile([60, 40]), 100, [1.0]) == 60
    assert evaluate_case1_objective(_profile([100, 100, 100]), 100, [1.0]) == 0
    two = _profile([[40, 60], [80, 90]])  # largest slacks 60 and 20
    assert evaluate_case1_objective(two, 100, [0.5, 0.5]) == 40


def test_pairwise_examples():
    assert evaluate_pairwise_objective(_profile([50, 50, 50]), [1.0]) == 0
    assert evaluate_pairwise_objective(_profile([60, 40]), [1.0]) == 20
    assert evaluate_pairwise_objective(_profile([10, 20, 40]), [1.0]) == 60


def test_active_window_is_each_scenarios_harvest_period():
    prof = _profile([[0, 30, 0, 10, 0], [0, 0, 20, 20, 0]])
    # scenario 0 period is weeks 2..4 (loads 30, 0, 10); scenario 1 is weeks 3..4
    assert evaluate_case1_objective(prof, 50, [0.5, 0.5]) == (50 + 30) / 2
    assert evaluate_pairwise_objective(prof, [0.5, 0.5]) == (30 + 10 + 20 + 0) / 2
    explicit = WindowLimit(1, 5)
    assert evaluate_case1_objective(prof, 50, [0.5, 0.5], explicit) == 50
    assert evaluate_pairwise_objective(prof, [0.5, 0.5], WindowLimit(2, 3)) == (30 + 20) / 2


def test_empty_active_window_and_strict_capacity():
    with pytest.raises(ValidationError):
        evaluate_case1_objective(_profile([0, 0]), 10, [1.0])
    with pytest.raises(InfeasibleError):
        evaluate_case1_objective(_profile([20, 5]), 10, [1.0], strict=True)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=40))
def test_pairwise_sort_formula(row):
    want = sum(abs(a - b) for a, b in itertools.combinations(row, 2))
    assert pairwise_abs_sum(np.array(row)) == want


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 5))
def test_pairwise_invariant_under_scenario_permutation(seed, S):
    rng = np.random.default_rng(seed)
    loads = rng.integers(1, 100, (S, 8))
    perm = rng.permutation(S)
    p = np.full(S, 1.0 / S)
    assert evaluate_pairwise_objective(_profile(loads), p) == evaluate_pairwise_objective(_profile(loads[perm]), p)


def test_oracle_helpers_agree_with_evaluators():
    row = np.array([0, 5, 0, 7, 3, 0])
    assert active_min(row) == 0
    assert active_pairwise(row) == evaluate_pairwise_objective(_profile(row), [1.0])


# ------------------------------------------------------------- exact


def test_exact_single_population_single_day():
    table = table_from_weeks([30], [[4]])
    sched = solve_case1_exact(table, 100)
    assert sched.assignment == {"p0": 0}
    assert sched.objective_case1 == 100 - 30


def test_exact_capacity_below_single_quantity_is_infeasible():
    table = table_from_weeks([30, 50], [[1, 2], [1, 2]])
    with pytest.raises(InfeasibleError):
        solve_case1_exact(table, 49)


def test_exact_budget_is_distinct_from_infeasible():
    table, cap = _small_table(3)
    with pytest.raises(BudgetExceededError):
        solve_case1_exact(table, 10**6, max_nodes=1)


@pytest.mark.parametrize("seed", range(12))
def test_exact_matches_enumeration_four_populations(seed):
    rng = np.random.default_rng(seed)
    weeks = [list(rng.integers(1, 6, rng.integers(1, 6))) for _ in range(4)]
    q = list(rng.integers(50, 150, 4))
    table = table_from_weeks(q, weeks)
    cap = int(max(q) + rng.integers(0, 150))
    want = brute_case1(table, cap)
    try:
        got = solve_case1_exact(table, cap)
    except InfeasibleError:
        assert want is None
        return
    assert got.objective_case1 == want
    _check_schedule(table, got, cap)


@pytest.mark.parametrize("seed", range(0, 40, 3))
def test_exact_matches_enumeration_small_family(seed):
    table, cap = _small_table(seed)
    want = brute_case1(table, cap)
    try:
        got = solve_case1_exact(table, cap)
    except InfeasibleError:
        assert want is None
        return
    assert got.objective_case1 == want
    _check_schedule(table, got, cap)


def test_exact_ties_go_to_lexicographically_smallest_days():
    # both populations in the same week is best; weeks 1 and 2 tie
    table = table_from_weeks([10, 10], [[1, 2], [1, 2]])
    sched = solve_case1_exact(table, 100)
    assert list(sched.days) == [0, 0]


def test_exact_respects_window():
    table = table_from_weeks([10, 10, 10], [[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    win = WindowLimit(3, 4)
    sched = solve_case1_exact(table, 100, win)
    _check_schedule(table, sched, 100, win)
    with pytest.raises(InfeasibleError):
        solve_case1_exact(table, 100, WindowLimit(5, 5))


def test_widening_window_never_increases_optimum():
    for seed in range(15):
        table, cap = _small_table(seed)
        try:
            full = reachable_window(table)
        except InfeasibleError:
            continue
        prev = None
        for k in range(full.n_weeks // 2, -1, -1):
            win = WindowLimit(full.first_week + k, max(full.first_week + k, full.last_week - k))
            try:
                v = solve_case1_exact(table, cap, win).objective_case1
            except InfeasibleError:
                assert prev is None
                continue
            if prev is not None:
                assert v <= prev
            prev = v


# ------------------------------------------------------------- heuristic


def test_heuristic_equals_exact_when_harvest_weeks_are_disjoint():
    weeks = [[1, 1, 1], [3, 3], [5, 5, 5, 5], [7]]
    table = table_from_weeks([40, 20, 30, 10], weeks)
    h = solve_case1_heuristic(table, 100)
    e = solve_case1_exact(table, 100)
    assert h.objective_case1 == e.objective_case1


def test_heuristic_within_ten_percent_on_random_instances():
    within, total = 0, 0
    for seed in range(50):
        table, cap = _small_table(1000 + seed)
        try:
            e = solve_case1_exact(table, cap).objective_case1
        except InfeasibleError:
            continue
        h = solve_case1_heuristic(table, cap, config=HeuristicConfig(seed=seed))
        _check_schedule(table, h, cap)
        total += 1
        within += h.objective_case1 <= e * 1.1 + 1e-9
    assert total >= 30
    assert within / total >= 0.9


def test_heuristic_same_seed_same_schedule():
    table, cap = _small_table(7)
    cap = int(table.quantities.sum())
    a = solve_case1_heuristic(table, cap, config=HeuristicConfig(seed=3))
    b = solve_case1_heuristic(table, cap, config=HeuristicConfig(seed=3))
    assert np.array_equal(a.days, b.days)
    assert a.objective_case1 == b.objective_case1


def test_heuristic_reports_binding_weeks():
    table = table_from_weeks([10, 10], [[4], [4]])
    with pytest.raises(InfeasibleError) as err:
        solve_case1_heuristic(table, 15)
    assert err.value.binding_weeks == [(0, 4, 20)]


# ------------------------------------------------------------- case 2


def test_case2_disjoint_weeks():
    table = table_from_weeks([10, 10], [[1, 2], [1, 2]])
    z, sched = solve_case2(table, engine="exact")
    assert z == 10
    assert sched.max_capacity_used == 10


def test_case2_forced_single_week():
    table = table_from_weeks([10, 25, 5], [[3, 3], [3], [3, 3, 3]])
    for engine in ("exact", "heuristic"):
        z, _ = solve_case2(table, engine=engine)
        assert z == 40


@pytest.mark.parametrize("seed", range(0, 60, 4))
def test_case2_binary_search_invariant_and_brute_force(seed):
    table, _ = _small_table(seed)
    want = brute_min_capacity(table)
    if want is None:
        with pytest.raises(InfeasibleError):
            solve_case2(table, engine="exact")
        return
    z, sched = solve_case2(table, engine="exact")
    assert z == want
    assert case2_feasible(table, z)
    assert not case2_feasible(table, z - 1)
    assert sched.max_capacity_used == z
    _check_schedule(table, sched, z)


def test_case2_heuristic_bound_is_achieved_and_not_below_optimum():
    for seed in range(10):
        table, _ = _small_table(seed)
        if brute_min_capacity(table) is None:
            continue
        z_exact, _ = solve_case2(table, engine="exact")
        z, sched = solve_case2(table, engine="heuristic")
        assert z >= z_exact
        assert sched.max_capacity_used <= z


def test_case2_adding_a_population_never_decreases_z():
    for seed in range(20):
        table, _ = _small_table(seed)
        if brute_min_capacity(table) is None:
            continue
        z_full, _ = solve_case2(table, engine="exact")
        z_less, _ = solve_case2(_subset(table, range(table.n_populations - 1)), engine="exact")
        assert z_less <= z_full


# ------------------------------------------------------------- sweep


def _sweep_table():
    weeks = [[1, 2, 3], [2, 3, 4], [2, 3], [4, 5, 6], [5, 6], [3, 4, 5]]
    return table_from_weeks([30, 20, 25, 30, 15, 20], weeks)


def test_sweep_singleton_range_equals_direct_solve():
    table = _sweep_table()
    res = sweep_harvest_windows(table, 60, first_weeks=[2], last_weeks=[5], engine="exact")
    assert len(res.grid) == 1
    direct = solve_case1_exact(table, 60, WindowLimit(2, 5))
    assert np.array_equal(res.schedule.days, direct.days)
    assert res.grid[0].eq6_value == direct.pairwise_objective


def test_sweep_argmin_matches_full_resolve_of_every_cell():
    table = _sweep_table()
    res = sweep_harvest_windows(table, 60, first_weeks=range(1, 5), last_weeks=range(3, 7), engine="exact")
    best = None
    for f in range(1, 5):
        for l_ in range(3, 7):
            if f > l_:
                continue
            try:
                s = solve_case1_exact(table, 60, WindowLimit(f, l_))
            except InfeasibleError:
                continue
            key = (s.pairwise_objective, l_ - f, f)
            best = key if best is None or key < best else best
    assert (res.best_window.first_week, res.best_window.last_week) == (best[2], best[2] + best[1])
    assert res.schedule.pairwise_objective == best[0]
    buf = io.StringIO()
    res.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "first_week,last_week,eq6_value,status"
    assert len(lines) == 1 + len(res.grid)


def test_sweep_default_ranges_and_all_infeasible():
    table = _sweep_table()
    res = sweep_harvest_windows(table, 60, engine="exact")
    assert any(c.status == "ok" for c in res.grid)
    with pytest.raises(InfeasibleError):
        sweep_harvest_windows(table, 60, first_weeks=[6], last_weeks=[6], engine="exact")


def test_sweep_is_deterministic():
    table, _ = _small_table(5)
    cap = int(table.quantities.sum())
    a = sweep_harvest_windows(table, cap, engine="heuristic")
    b = sweep_harvest_windows(table, cap, engine="heuristic", threads=2)
    assert [(c.first_week, c.last_week, c.eq6_value, c.status) for c in a.grid] == [
        (c.first_week, c.last_week, c.eq6_value, c.status) for c in b.grid
    ]
    assert np.array_equal(a.schedule.days, b.schedule.days)


# ------------------------------------------------------------- report


def test_report_period_19_to_67():
    table = table_from_weeks([100, 200], [[19], [67]])
    rep = evaluate_schedule(np.array([0, 0]), table, capacity=300)
    assert (rep["first_harvest_week"], rep["last_harvest_week"], rep["harvesting_period"]) == (19, 67, 49)
    assert rep["max_required_capacity"] == 200
    assert rep["feasible"] is True


def test_report_single_population():
    table = table_from_weeks([123], [[8, 9]])
    rep = evaluate_schedule(np.array([1]), table, capacity=200)
    assert rep["harvesting_period"] == 1
    assert rep["max_required_capacity"] == 123
    assert rep["case1_objective"] == 200 - 123


def test_report_matches_profiles():
    table, cap = _small_table(11)
    cap = int(table.quantities.sum())
    sched = solve_case1_heuristic(table, cap)
    rep = evaluate_schedule(sched, table, cap)
    prof = profile_from_days(table, sched.days)
    assert rep["max_required_capacity"] == max(r["max_required_capacity"] for r in rep["per_scenario"])
    assert rep["max_required_capacity"] == prof.max_load()
    assert rep["case1_objective"] == sched.objective_case1
    assert rep["pairwise_objective"] == sched.pairwise_objective
