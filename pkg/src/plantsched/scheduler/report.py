"""Schedule evaluation in the shape of the original-vs-optimal tables."""
from __future__ import annotations

import numpy as np

from .instance import profile_from_days
from .objectives import (
    case1_per_scenario,
    evaluate_case1_objective,
    evaluate_pairwise_objective,
    pairwise_per_scenario,
)


def evaluate_schedule(schedule, table, capacity=None) -> dict:
    """First/last harvest week, period length, peak weekly harvest and both objectives.

    The profile is recomputed from the raw table rather than trusted from
    the schedule. Objectives are taken over each scenario's realised harvest period.
    """
    days = schedule.days if hasattr(schedule, "days") else np.asarray(schedule)
    profile = profile_from_days(table, days)
    span = profile.harvest_span()
    probs = table.probabilities
    per = []
    for s in range(profile.n_scenarios):
        used = np.flatnonzero(profile.loads[s] > 0)
        per.append(
            {
                "scenario": s,
                "first_harvest_week": profile.first_week + int(used[0]),
                "last_harvest_week": profile.first_week + int(used[-1]),
                "max_required_capacity": int(profile.loads[s].max()),
            }
        )
    pw = pairwise_per_scenario(profile)
    for row, v in zip(per, pw):
        row["pairwise_objective"] = v
    out = {
        "first_harvest_week": span[0],
        "last_harvest_week": span[1],
        "harvesting_period": span[1] - span[0] + 1,
        "max_required_capacity": profile.max_load(),
        "pairwise_objective": evaluate_pairwise_objective(profile, probs),
        "capacity": None if capacity is None else int(capacity),
        "case1_objective": None,
        "feasible": None,
        "total_ears": int(table.quantities.sum()),
        "per_scenario": per,
    }
    if capacity is not None:
        out["case1_objective"] = evaluate_case1_objective(profile, capacity, probs)
        out["feasible"] = bool(profile.max_load() <= capacity)
        for row, v in zip(per, case1_per_scenario(profile, capacity)):
            row["case1_objective"] = v
    return out
