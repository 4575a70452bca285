"""Greedy construction plus first-improvement local search.

Construction places populations in decreasing quantity order on the
option whose harvest weeks currently carry the least expected load
(capacity overflow avoided first). Descent then tries single-day moves and
day swaps between populations with overlapping windows, ordered by the key
(capacity overflow, case-1 objective, pairwise objective). Perturbation
rounds re-plant a random fraction of populations and descend again,
keeping the best state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError
from . import _kernels as K
from .instance import CompiledInstance, compile_instance, make_schedule


@dataclass(frozen=True)
class HeuristicConfig:
    seed: int = 0
    iterations: int = 200  # max descent passes per round
    restarts: int = 30  # perturbation rounds
    perturb_fraction: float = 0.25
    perm_cycle: int = 8


def overlapping_pairs(inst: CompiledInstance):
    """Index pairs ``a < b`` whose admissible planting days overlap in range."""
    lo = np.array([inst.option_days(i).min() for i in range(inst.n)], dtype=np.int64)
    hi = np.array([inst.option_days(i).max() for i in range(inst.n)], dtype=np.int64)
    order = np.lexsort((np.arange(inst.n), lo))
    pa, pb = [], []
    for x, a in enumerate(order):
        for b in order[x + 1 :]:
            if lo[b] > hi[a]:
                break
            pa.append(min(a, b))
            pb.append(max(a, b))
    if not pa:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    pairs = np.array(sorted(zip(pa, pb)), dtype=np.int64)
    return np.ascontiguousarray(pairs[:, 0]), np.ascontiguousarray(pairs[:, 1])


def greedy(inst: CompiledInstance, capacity: int) -> np.ndarray:
    """Largest-quantity-first insertion into the least loaded harvest weeks."""
    loads = np.zeros((inst.n_scenarios, inst.n_weeks), dtype=np.int64)
    choice = np.zeros(inst.n, dtype=np.int64)
    s_idx = np.arange(inst.n_scenarios)
    for i in sorted(range(inst.n), key=lambda j: (-int(inst.qty[j]), j)):
        w = inst.opt_week[inst.opt_start[i] : inst.opt_start[i + 1]]  # (k, S)
        cur = loads[s_idx[None, :], w]
        q = int(inst.qty[i])
        ov_inc = (np.maximum(cur + q - capacity, 0) - np.maximum(cur - capacity, 0)).sum(axis=1)
        wload = K._expect_rows(cur, inst.probs, inst.uniform)
        k = int(np.lexsort((np.arange(len(w)), wload, ov_inc))[0])
        choice[i] = k
        loads[s_idx, w[k]] += q
    return choice


def _key(inst, loads, capacity, mode):
    ov, mins, lens, pws, tot = K.state_values(loads, int(capacity))
    span_pw = K.span_pairwise(pws, lens, tot, loads.shape[1], np.empty_like(pws))
    obj = capacity - K._expect(mins, inst.probs, inst.uniform)
    pw = K._expect(span_pw, inst.probs, inst.uniform)
    if mode == K.MODE_FEASIBILITY:
        return (int(ov), pw)
    return (int(ov), obj, pw)


def improve(inst: CompiledInstance, capacity: int, choice, config: HeuristicConfig, mode=K.MODE_OPTIMIZE):
    """Iterated local search from ``choice``; returns ``(choice, loads, key)``."""
    rng = np.random.default_rng(config.seed)
    pair_a, pair_b = overlapping_pairs(inst)
    n_opts = np.diff(inst.opt_start)

    def descend(ch):
        ch = np.ascontiguousarray(ch, dtype=np.int64).copy()
        loads = inst.loads_of(ch)
        perms = np.stack([rng.permutation(inst.n) for _ in range(config.perm_cycle)]).astype(np.int64)
        K.run_local_search(
            inst.opt_start, inst.opt_week, inst.qty, inst.probs, inst.uniform, int(capacity), ch, loads, mode,
            perms, pair_a, pair_b, inst.lookup_start, inst.lookup_first_day, inst.lookup, inst.opt_day,
            int(config.iterations),
        )
        return ch, loads, _key(inst, loads, capacity, mode)

    best = descend(choice)
    # at least two, so a kick can undo moves that only pay off jointly
    n_kick = min(inst.n, max(2, int(round(config.perturb_fraction * inst.n))))
    for _ in range(config.restarts):
        if mode == K.MODE_FEASIBILITY and best[2][0] == 0:
            break
        ch = best[0].copy()
        who = rng.choice(inst.n, size=n_kick, replace=False)
        ch[who] = (rng.random(len(who)) * n_opts[who]).astype(np.int64)
        cand = descend(ch)
        if cand[2] < best[2]:
            best = cand
    return best


def binding_weeks(inst, loads, capacity):
    s, w = np.nonzero(loads > capacity)
    return [(int(a), inst.window.first_week + int(b), int(loads[a, b])) for a, b in zip(s, w)]


def solve_case1_heuristic(table, capacity, window=None, populations=None, config: HeuristicConfig | None = None,
                          start=None):
    """Iterated local search from ``start`` (option indices) or the greedy construction."""
    config = config or HeuristicConfig()
    inst = compile_instance(table, capacity, window)
    if start is None:
        start = greedy(inst, capacity)
    choice, loads, key = improve(inst, capacity, start, config)
    if key[0] > 0:
        raise InfeasibleError(
            f"heuristic could not keep weekly harvest <= {capacity}", binding_weeks(inst, loads, capacity)
        )
    return make_schedule(table, inst.days_of(choice), inst.window, capacity, engine="heuristic")


def find_feasible(inst: CompiledInstance, capacity: int, config: HeuristicConfig):
    """Capacity-feasible choice vector or ``None`` (objective ignored)."""
    choice, loads, key = improve(inst, capacity, greedy(inst, capacity), config, mode=K.MODE_FEASIBILITY)
    return choice if key[0] == 0 else None
