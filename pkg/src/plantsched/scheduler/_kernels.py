"""Solver inner loops.

All loads are integer ears, so capacity checks and pairwise sums are exact.
Scenario expectations follow ``objectives.expectation`` bit for bit.
Objectives are taken over each scenario's active span, from its first to
its last nonzero week. Weeks outside the span are empty, so the span
pairwise sum equals the full-row sum minus ``(n_weeks - span) * total``.
"""
import numpy as np

from .. import _accel

MODE_OPTIMIZE = 0
MODE_FEASIBILITY = 1

STATUS_OK = 0
STATUS_INFEASIBLE = 1
STATUS_BUDGET = 2


@_accel.njit
def _expect(vals, probs, uniform):
    n = vals.shape[0]
    if uniform:
        tot = 0
        for s in range(n):
            tot += vals[s]
        return tot / n
    acc = 0.0
    for s in range(n):
        acc = acc + probs[s] * vals[s]
    return acc


@_accel.njit
def _pairwise_row(row):
    srt = np.sort(row)
    n = srt.shape[0]
    tot = 0
    for k in range(n):
        tot += srt[k] * (2 * k - n + 1)
    return tot


@_accel.njit
def _span(row):
    """First and last index with a nonzero entry; ``(0, -1)`` for an empty row."""
    n = row.shape[0]
    a = 0
    while a < n and row[a] == 0:
        a += 1
    if a == n:
        return 0, -1
    b = n - 1
    while row[b] == 0:
        b -= 1
    return a, b


@_accel.njit
def _span_min(row):
    """``(min over the active span, span length)``."""
    a, b = _span(row)
    if b < a:
        return 0, 0
    m = row[a]
    for w in range(a + 1, b + 1):
        if row[w] < m:
            m = row[w]
    return m, b - a + 1


@_accel.njit
def _leaf_values(loads, probs, uniform, cap):
    n_s = loads.shape[0]
    mins = np.empty(n_s, dtype=np.int64)
    pws = np.empty(n_s, dtype=np.int64)
    for s in range(n_s):
        a, b = _span(loads[s])
        mins[s] = loads[s, a : b + 1].min()
        pws[s] = _pairwise_row(loads[s, a : b + 1])
    return cap - _expect(mins, probs, uniform), _expect(pws, probs, uniform)


@_accel.njit
def _interval_pairwise_lb(lo, hi):
    tot = 0
    n = lo.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            if lo[a] > hi[b]:
                tot += lo[a] - hi[b]
            elif lo[b] > hi[a]:
                tot += lo[b] - hi[a]
    return tot


@_accel.njit
def branch_and_bound(opt_start, opt_week, qty, probs, uniform, cap, n_weeks, reach, mode, budget, best_choice):
    """Depth-first search over populations in index order, days ascending.

    ``reach[d, s, w]`` is the total quantity of populations ``>= d`` having
    some option harvested in week ``w`` of scenario ``s``. Final spans contain
    the current ones and loads only grow, so bounds look at current-span
    weeks with loads raised by ``reach`` (capped). In optimise mode the
    incumbent is replaced only by a strictly smaller (case-1, pairwise) pair,
    so the first optimum found, which is lexicographically smallest, is kept.
    Returns ``(status, nodes, best_obj, best_pw)``.
    """
    n = qty.shape[0]
    n_s = probs.shape[0]
    loads = np.zeros((n_s, n_weeks), dtype=np.int64)
    choice = np.full(n, -1, dtype=np.int64)
    applied = np.zeros(n, dtype=np.bool_)
    best_obj = np.inf
    best_pw = np.inf
    found = False
    nodes = 0
    ub = np.empty(n_s, dtype=np.int64)
    pwlb = np.empty(n_s, dtype=np.int64)
    lo = np.empty(n_weeks, dtype=np.int64)
    hi = np.empty(n_weeks, dtype=np.int64)
    if n == 0:
        return STATUS_INFEASIBLE, 0, best_obj, best_pw
    d = 0
    while d >= 0:
        if applied[d]:
            o = opt_start[d] + choice[d]
            for s in range(n_s):
                loads[s, opt_week[o, s]] -= qty[d]
            applied[d] = False
        choice[d] += 1
        if choice[d] >= opt_start[d + 1] - opt_start[d]:
            choice[d] = -1
            d -= 1
            continue
        o = opt_start[d] + choice[d]
        q = qty[d]
        ok = True
        for s in range(n_s):
            if loads[s, opt_week[o, s]] + q > cap:
                ok = False
                break
        if not ok:
            continue
        for s in range(n_s):
            loads[s, opt_week[o, s]] += q
        applied[d] = True
        nodes += 1
        if nodes > budget:
            return STATUS_BUDGET, nodes, best_obj, best_pw

        if d == n - 1:
            obj, pw = _leaf_values(loads, probs, uniform, cap)
            if mode == MODE_FEASIBILITY:
                best_choice[:] = choice
                return STATUS_OK, nodes, obj, pw
            if (not found) or obj < best_obj or (obj == best_obj and pw < best_pw):
                best_obj = obj
                best_pw = pw
                best_choice[:] = choice
                found = True
            continue

        # forward check: every later population still has a capacity-feasible option
        dead = False
        for j in range(d + 1, n):
            any_ok = False
            for oj in range(opt_start[j], opt_start[j + 1]):
                fits = True
                for s in range(n_s):
                    if loads[s, opt_week[oj, s]] + qty[j] > cap:
                        fits = False
                        break
                if fits:
                    any_ok = True
                    break
            if not any_ok:
                dead = True
                break
        if dead:
            continue

        if mode == MODE_OPTIMIZE and found:
            for s in range(n_s):
                m = cap
                a, b = _span(loads[s])
                for w in range(a, b + 1):
                    v = loads[s, w] + reach[d + 1, s, w]
                    if v > cap:
                        v = cap
                    if v < m:
                        m = v
                ub[s] = m
            lb = cap - _expect(ub, probs, uniform)
            if lb > best_obj:
                continue
            if lb >= best_obj:
                for s in range(n_s):
                    a, b = _span(loads[s])
                    for w in range(a, b + 1):
                        lo[w - a] = loads[s, w]
                        v = loads[s, w] + reach[d + 1, s, w]
                        hi[w - a] = cap if v > cap else v
                    pwlb[s] = _interval_pairwise_lb(lo[: b - a + 1], hi[: b - a + 1])
                if _expect(pwlb, probs, uniform) >= best_pw:
                    continue
        d += 1
    if found:
        return STATUS_OK, nodes, best_obj, best_pw
    return STATUS_INFEASIBLE, nodes, best_obj, best_pw


# ---------------------------------------------------------------- local search


@_accel.njit
def _cell(loads, s, w, delta, cap, n_weeks, want_pw):
    old = loads[s, w]
    new = old + delta
    dpw = 0
    if want_pw:
        for v in range(n_weeks):
            if v != w:
                x = loads[s, v]
                dpw += abs(new - x) - abs(old - x)
    dov = max(0, new - cap) - max(0, old - cap)
    loads[s, w] = new
    return dpw, dov


@_accel.njit
def state_values(loads, cap):
    """``(overflow, span mins, span lengths, full-row pairwise sums, row totals)``."""
    n_s, n_w = loads.shape
    ov = 0
    mins = np.empty(n_s, dtype=np.int64)
    lens = np.empty(n_s, dtype=np.int64)
    pws = np.empty(n_s, dtype=np.int64)
    tot = np.empty(n_s, dtype=np.int64)
    for s in range(n_s):
        t = 0
        for w in range(n_w):
            x = loads[s, w]
            t += x
            if x > cap:
                ov += x - cap
        mins[s], lens[s] = _span_min(loads[s])
        pws[s] = _pairwise_row(loads[s])
        tot[s] = t
    return ov, mins, lens, pws, tot


@_accel.njit
def span_pairwise(pws, lens, tot, n_w, out):
    """Span pairwise sums from full-row sums (empty weeks pair with every span week)."""
    for s in range(pws.shape[0]):
        out[s] = pws[s] - (n_w - lens[s]) * tot[s]
    return out


@_accel.njit
def _try_change(loads, opt_week, qty, probs, uniform, cap, mode, pops, src, dst, cur_ov, st, scratch):
    """Apply a move/swap if it improves the (overflow, case-1, pairwise) key.

    ``st`` holds the current (mins, lens, full pairwise, totals) rows and is
    updated on acceptance. Returns ``(accepted, new_overflow)``.
    """
    mins, lens, pws, tot = st[0], st[1], st[2], st[3]
    dpw, new_mins, new_lens, adj_new, adj_cur = scratch[0], scratch[1], scratch[2], scratch[3], scratch[4]
    n_s, n_w = loads.shape
    m = pops.shape[0]
    dov = 0
    for s in range(n_s):
        dpw[s] = 0
    for k in range(m):
        q = qty[pops[k]]
        for s in range(n_s):
            wa = opt_week[src[k], s]
            wb = opt_week[dst[k], s]
            if wa != wb:
                a, b = _cell(loads, s, wa, -q, cap, n_w, True)
                dpw[s] += a
                dov += b
                a, b = _cell(loads, s, wb, q, cap, n_w, True)
                dpw[s] += a
                dov += b
    accept = False
    decided = False
    if dov < 0:
        accept = True
        decided = True
    elif dov > 0:
        decided = True
    if (not decided) and mode == MODE_FEASIBILITY and cur_ov == 0:
        # feasible already: nothing to gain in feasibility mode
        decided = True
    if accept or not decided:
        for s in range(n_s):
            new_mins[s], new_lens[s] = _span_min(loads[s])
    if not decided and mode == MODE_OPTIMIZE:
        o_new = cap - _expect(new_mins, probs, uniform)
        o_cur = cap - _expect(mins, probs, uniform)
        if o_new < o_cur:
            accept = True
            decided = True
        elif o_new > o_cur:
            decided = True
    if not decided:
        for s in range(n_s):
            adj_new[s] = pws[s] + dpw[s] - (n_w - new_lens[s]) * tot[s]
            adj_cur[s] = pws[s] - (n_w - lens[s]) * tot[s]
        if _expect(adj_new, probs, uniform) < _expect(adj_cur, probs, uniform):
            accept = True
    if accept:
        for s in range(n_s):
            pws[s] += dpw[s]
            mins[s] = new_mins[s]
            lens[s] = new_lens[s]
        return True, cur_ov + dov
    # revert in reverse order
    for k in range(m - 1, -1, -1):
        q = qty[pops[k]]
        for s in range(n_s):
            wa = opt_week[src[k], s]
            wb = opt_week[dst[k], s]
            if wa != wb:
                loads[s, wb] -= q
                loads[s, wa] += q
    return False, cur_ov


@_accel.njit
def local_search(opt_start, opt_week, qty, probs, uniform, cap, choice, loads, mode, perms, pair_a, pair_b,
                 lookup_start, lookup_first_day, lookup, opt_day, max_passes):
    """First-improvement descent over single-population day moves and day swaps.

    ``choice`` and ``loads`` are updated in place. ``perms[p % len(perms)]``
    gives the population scan order of pass ``p``. Stops at a local optimum,
    after ``max_passes`` passes, or (feasibility mode) once overflow is zero.
    Returns the number of passes run.
    """
    n = qty.shape[0]
    n_s = probs.shape[0]
    ov, mins, lens, pws, tot = state_values(loads, cap)
    st = np.empty((4, n_s), dtype=np.int64)
    st[0], st[1], st[2], st[3] = mins, lens, pws, tot
    scratch = np.empty((5, n_s), dtype=np.int64)
    one = np.empty(1, dtype=np.int64)
    src1 = np.empty(1, dtype=np.int64)
    dst1 = np.empty(1, dtype=np.int64)
    two = np.empty(2, dtype=np.int64)
    src2 = np.empty(2, dtype=np.int64)
    dst2 = np.empty(2, dtype=np.int64)
    passes = 0
    while passes < max_passes:
        if mode == MODE_FEASIBILITY and ov == 0:
            break
        perm = perms[passes % perms.shape[0]]
        passes += 1
        improved = False
        for ii in range(n):
            i = perm[ii]
            base = opt_start[i]
            cnt = opt_start[i + 1] - base
            for k in range(cnt):
                if k == choice[i]:
                    continue
                one[0] = i
                src1[0] = base + choice[i]
                dst1[0] = base + k
                acc, ov = _try_change(loads, opt_week, qty, probs, uniform, cap, mode, one, src1, dst1,
                                      ov, st, scratch)
                if acc:
                    choice[i] = k
                    improved = True
                    break
        for p in range(pair_a.shape[0]):
            a = pair_a[p]
            b = pair_b[p]
            da = opt_day[opt_start[a] + choice[a]]
            db = opt_day[opt_start[b] + choice[b]]
            if da == db:
                continue
            ia = db - lookup_first_day[a]
            ib = da - lookup_first_day[b]
            if ia < 0 or ia >= lookup_start[a + 1] - lookup_start[a]:
                continue
            if ib < 0 or ib >= lookup_start[b + 1] - lookup_start[b]:
                continue
            ka = lookup[lookup_start[a] + ia]
            kb = lookup[lookup_start[b] + ib]
            if ka < 0 or kb < 0:
                continue
            two[0] = a
            two[1] = b
            src2[0] = opt_start[a] + choice[a]
            src2[1] = opt_start[b] + choice[b]
            dst2[0] = opt_start[a] + ka
            dst2[1] = opt_start[b] + kb
            acc, ov = _try_change(loads, opt_week, qty, probs, uniform, cap, mode, two, src2, dst2,
                                  ov, st, scratch)
            if acc:
                choice[a] = ka
                choice[b] = kb
                improved = True
        if not improved:
            break
    return passes


# ------------------------------------------------------ numpy local search


def _expect_rows(vals, probs, uniform):
    """``_expect`` applied to each row of ``vals`` (K, S), same rounding."""
    if uniform:
        return vals.sum(axis=1) / vals.shape[1]
    acc = np.zeros(vals.shape[0])
    for s in range(vals.shape[1]):
        acc = acc + probs[s] * vals[:, s]
    return acc


def _pairwise_rows(loads):
    srt = np.sort(loads, axis=-1)
    n = srt.shape[-1]
    return (srt * (2 * np.arange(n, dtype=np.int64) - n + 1)).sum(axis=-1)


def _candidate_keys(loads, cand, cap, probs, uniform):
    """Overflow, case-1 and pairwise values for candidate load tensors (K, S, W)."""
    n_w = cand.shape[2]
    ov = np.maximum(cand - cap, 0).sum(axis=(1, 2))
    nz = cand > 0
    first = nz.argmax(axis=2)
    last = n_w - 1 - nz[:, :, ::-1].argmax(axis=2)
    idx = np.arange(n_w)
    inside = (idx >= first[..., None]) & (idx <= last[..., None])
    mins = np.where(inside, cand, np.iinfo(np.int64).max).min(axis=2)
    obj = cap - _expect_rows(mins, probs, uniform)
    pws = _pairwise_rows(cand) - (n_w - (last - first + 1)) * cand.sum(axis=2)
    pw = _expect_rows(pws, probs, uniform)
    return ov, obj, pw


def _first_better(ov, obj, pw, cur, mode):
    cur_ov, cur_obj, cur_pw = cur
    if mode == MODE_FEASIBILITY:
        if cur_ov == 0:
            return -1
        better = (ov < cur_ov) | ((ov == cur_ov) & (pw < cur_pw))
    else:
        better = (ov < cur_ov) | ((ov == cur_ov) & ((obj < cur_obj) | ((obj == cur_obj) & (pw < cur_pw))))
    hits = np.flatnonzero(better)
    return int(hits[0]) if hits.size else -1


def local_search_numpy(opt_start, opt_week, qty, probs, uniform, cap, choice, loads, mode, perms, pair_a, pair_b,
                       lookup_start, lookup_first_day, lookup, opt_day, max_passes):
    """Same descent as ``local_search``; each population's moves are scored in one batch."""
    n_s, n_w = loads.shape
    s_idx = np.arange(n_s)

    def key_of(ld):
        ov, obj, pw = _candidate_keys(ld, ld[None], cap, probs, uniform)
        return int(ov[0]), float(obj[0]), float(pw[0])

    cur = key_of(loads)
    passes = 0
    while passes < max_passes:
        if mode == MODE_FEASIBILITY and cur[0] == 0:
            break
        perm = perms[passes % len(perms)]
        passes += 1
        improved = False
        for i in perm:
            base, cnt = opt_start[i], opt_start[i + 1] - opt_start[i]
            ks = np.array([k for k in range(cnt) if k != choice[i]], dtype=np.int64)
            if ks.size == 0:
                continue
            wa = opt_week[base + choice[i]]
            wb = opt_week[base + ks]
            cand = np.repeat(loads[None], len(ks), axis=0)
            rows = np.arange(len(ks))[:, None]
            moved = wb != wa[None, :]
            cand[rows, s_idx[None, :], wa[None, :]] -= qty[i] * moved
            cand[rows, s_idx[None, :], wb] += qty[i] * moved
            ov, obj, pw = _candidate_keys(loads, cand, cap, probs, uniform)
            j = _first_better(ov, obj, pw, cur, mode)
            if j >= 0:
                loads[:] = cand[j]
                choice[i] = ks[j]
                cur = (int(ov[j]), float(obj[j]), float(pw[j]))
                improved = True
        for a, b in zip(pair_a, pair_b):
            da = opt_day[opt_start[a] + choice[a]]
            db = opt_day[opt_start[b] + choice[b]]
            if da == db:
                continue
            ia, ib = db - lookup_first_day[a], da - lookup_first_day[b]
            if not (0 <= ia < lookup_start[a + 1] - lookup_start[a] and 0 <= ib < lookup_start[b + 1] - lookup_start[b]):
                continue
            ka, kb = lookup[lookup_start[a] + ia], lookup[lookup_start[b] + ib]
            if ka < 0 or kb < 0:
                continue
            cand = loads.copy()
            for p, src, dst in ((a, choice[a], ka), (b, choice[b], kb)):
                w0 = opt_week[opt_start[p] + src]
                w1 = opt_week[opt_start[p] + dst]
                mv = w0 != w1
                cand[s_idx[mv], w0[mv]] -= qty[p]
                cand[s_idx[mv], w1[mv]] += qty[p]
            ov, obj, pw = _candidate_keys(loads, cand[None], cap, probs, uniform)
            if _first_better(ov, obj, pw, cur, mode) == 0:
                loads[:] = cand
                choice[a], choice[b] = ka, kb
                cur = (int(ov[0]), float(obj[0]), float(pw[0]))
                improved = True
        if not improved:
            break
    return passes


def run_local_search(*args):
    if _accel.NUMBA_ENABLED:
        return local_search(*args)
    return local_search_numpy(*args)
