"""Exact branch-and-bound for the capacitated consistency problem."""
from __future__ import annotations

import numpy as np

from ..errors import BudgetExceededError, InfeasibleError
from . import _kernels as K
from .instance import CompiledInstance, compile_instance, make_schedule

DEFAULT_MAX_NODES = 10_000_000


def reach_table(inst: CompiledInstance) -> np.ndarray:
    """``reach[d, s, w]``: quantity of populations ``>= d`` able to land in week ``w``."""
    n, n_s, n_w = inst.n, inst.n_scenarios, inst.n_weeks
    reach = np.zeros((n + 1, n_s, n_w), dtype=np.int64)
    s_idx = np.arange(n_s)
    for i in range(n - 1, -1, -1):
        mask = np.zeros((n_s, n_w), dtype=bool)
        w = inst.opt_week[inst.opt_start[i] : inst.opt_start[i + 1]]
        mask[np.broadcast_to(s_idx, w.shape), w] = True
        reach[i] = reach[i + 1] + inst.qty[i] * mask
    return reach


def search(inst: CompiledInstance, capacity: int, feasibility_only=False, max_nodes=DEFAULT_MAX_NODES):
    """Run the search; returns ``(choice, nodes)`` or raises Infeasible/BudgetExceeded."""
    best = np.zeros(inst.n, dtype=np.int64)
    mode = K.MODE_FEASIBILITY if feasibility_only else K.MODE_OPTIMIZE
    status, nodes, _, _ = K.branch_and_bound(
        inst.opt_start, inst.opt_week, inst.qty, inst.probs, inst.uniform, int(capacity),
        inst.n_weeks, reach_table(inst), mode, int(max_nodes), best,
    )
    if status == K.STATUS_BUDGET:
        raise BudgetExceededError(f"exact search exceeded {max_nodes} nodes")
    if status == K.STATUS_INFEASIBLE:
        raise InfeasibleError(
            f"no schedule keeps weekly harvest <= {capacity} inside weeks "
            f"{inst.window.first_week}..{inst.window.last_week}"
        )
    return best, nodes


def solve_case1_exact(table, capacity, window=None, populations=None, max_nodes=DEFAULT_MAX_NODES):
    """Globally optimal schedule for the expected-max-slack objective.

    Ties are broken by the pairwise objective, then by the lexicographically
    smallest vector of planting days. ``populations`` is accepted for
    interface symmetry; the table already carries everything needed.
    """
    inst = compile_instance(table, capacity, window)
    if int(inst.qty.max(initial=0)) > capacity:
        raise InfeasibleError(f"a single population ({int(inst.qty.max())} ears) exceeds capacity {capacity}")
    choice, nodes = search(inst, capacity, max_nodes=max_nodes)
    return make_schedule(table, inst.days_of(choice), inst.window, capacity, engine="exact", nodes=nodes)
