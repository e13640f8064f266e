"""Numba kernels for the enumeration-heavy inner loops.

Kept separate so the rest of the package stays importable while these
compile (first call per process pays the JIT cost; cache=True amortizes
across processes).

Spin states are walked in Gray-code order: step k flips the spin at the
index of the lowest set bit of k, so each of the 2^n states is visited
once with an O(incidence) incremental energy update instead of a full
re-evaluation.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _flip_delta(i, spins, j_vals, inc_start, inc_entry, inc_others, pm1):
    # sum over interaction tuples containing i of J * product of the other spins
    acc = 0.0
    for t in range(inc_start[i], inc_start[i + 1]):
        prod = j_vals[inc_entry[t]]
        base = t * pm1
        for q in range(pm1):
            prod *= spins[inc_others[base + q]]
        acc += prod
    return acc


@njit(cache=True)
def gray_ground_state(n, j_vals, inc_start, inc_entry, inc_others, pm1):
    """Scan all 2^n spin states; return (best raw energy, best state mask).

    Bit i of the mask set means spin i is -1. Raw energy is the plain
    coupling sum without the n^{-(p+1)/2} scale.
    """
    spins = np.ones(n, dtype=np.int8)
    h = j_vals.sum()
    best = h
    best_mask = np.uint64(0)
    mask = np.uint64(0)
    one = np.uint64(1)
    for k in range(1, 2**n):
        i = 0
        kk = k
        while not (kk & 1):
            kk >>= 1
            i += 1
        h -= 2.0 * spins[i] * _flip_delta(i, spins, j_vals, inc_start, inc_entry, inc_others, pm1)
        spins[i] = -spins[i]
        mask ^= one << np.uint64(i)
        if h > best:
            best = h
            best_mask = mask
    return best, best_mask


@njit(cache=True)
def gray_level_set(n, j_vals, inc_start, inc_entry, inc_others, pm1, eta_raw, cap):
    """All state masks with raw energy >= eta_raw, or an overflow flag.

    Returns (masks array, count, overflowed). When overflowed is True the
    array holds the first `cap` hits only.
    """
    spins = np.ones(n, dtype=np.int8)
    h = j_vals.sum()
    out = np.empty(cap, dtype=np.uint64)
    cnt = 0
    overflow = False
    mask = np.uint64(0)
    one = np.uint64(1)
    if h >= eta_raw:
        out[cnt] = mask
        cnt += 1
    for k in range(1, 2**n):
        i = 0
        kk = k
        while not (kk & 1):
            kk >>= 1
            i += 1
        h -= 2.0 * spins[i] * _flip_delta(i, spins, j_vals, inc_start, inc_entry, inc_others, pm1)
        spins[i] = -spins[i]
        mask ^= one << np.uint64(i)
        if h >= eta_raw:
            if cnt >= cap:
                overflow = True
                break
            out[cnt] = mask
            cnt += 1
    return out[:cnt], cnt, overflow


@njit(cache=True)
def walksat_kernel(n, m, k, clause_lits, occ_start, occ_cls, init_assign, max_flips, noise, rand_u):
    """WalkSAT focused search. clause_lits is (m, k) signed DIMACS literals.

    rand_u is a pre-drawn uniform [0,1) pool consuming a fixed stride of
    k + 2 values per flip: clause pick, noise coin, then one tie-break draw
    per clause position. Returns (found, flips_used, assignment).
    """
    assign = init_assign.copy()  # int8 +-1 per variable, slot 0 unused
    sat_count = np.zeros(m, dtype=np.int32)
    unsat_idx = np.empty(m, dtype=np.int32)   # stack of unsatisfied clauses
    unsat_pos = np.full(m, -1, dtype=np.int32)
    n_unsat = 0
    for c in range(m):
        sc = 0
        for t in range(k):
            lit = clause_lits[c, t]
            v = lit if lit > 0 else -lit
            if (lit > 0) == (assign[v] > 0):
                sc += 1
        sat_count[c] = sc
        if sc == 0:
            unsat_idx[n_unsat] = c
            unsat_pos[c] = n_unsat
            n_unsat += 1

    stride = k + 2
    for flip in range(max_flips):
        if n_unsat == 0:
            return True, flip, assign
        ru = flip * stride
        ci = int(rand_u[ru] * n_unsat)
        if ci >= n_unsat:
            ci = n_unsat - 1
        c = unsat_idx[ci]
        if rand_u[ru + 1] < noise:
            pick = int(rand_u[ru + 2] * k)
            if pick >= k:
                pick = k - 1
        else:
            # min-break variable; ties broken by reservoir over fresh draws
            pick = 0
            best_break = 2147483647
            ties = 0
            for t in range(k):
                lit = clause_lits[c, t]
                v = lit if lit > 0 else -lit
                # flipping v breaks clauses where v's current literal is the sole support
                cur_lit = v if assign[v] > 0 else -v
                li = 2 * (v - 1) + (0 if cur_lit > 0 else 1)
                br = 0
                for o in range(occ_start[li], occ_start[li + 1]):
                    if sat_count[occ_cls[o]] == 1:
                        br += 1
                if br < best_break:
                    best_break = br
                    pick = t
                    ties = 1
                elif br == best_break:
                    ties += 1
                    if rand_u[ru + 2 + t] * ties < 1.0:
                        pick = t
        lit = clause_lits[c, pick]
        v = lit if lit > 0 else -lit
        old_lit = v if assign[v] > 0 else -v
        li_old = 2 * (v - 1) + (0 if old_lit > 0 else 1)
        li_new = li_old ^ 1
        for o in range(occ_start[li_old], occ_start[li_old + 1]):
            cc = occ_cls[o]
            sat_count[cc] -= 1
            if sat_count[cc] == 0:
                unsat_idx[n_unsat] = cc
                unsat_pos[cc] = n_unsat
                n_unsat += 1
        for o in range(occ_start[li_new], occ_start[li_new + 1]):
            cc = occ_cls[o]
            if sat_count[cc] == 0:
                pos = unsat_pos[cc]
                last = unsat_idx[n_unsat - 1]
                unsat_idx[pos] = last
                unsat_pos[last] = pos
                n_unsat -= 1
                unsat_pos[cc] = -1
            sat_count[cc] += 1
        assign[v] = -assign[v]
    return n_unsat == 0, max_flips, assign


@njit(cache=True)
def dpll_kernel(n, m, cstart, clits, ostart, ocls, budget, use_pure):
    """Iterative DPLL with unit propagation, optional pure-literal rule,
    and MOMS branching (most occurrences in minimum-size active clauses,
    ties to the lowest variable index, polarity by majority).

    Literal index convention: positive v -> 2(v-1), negative v -> 2(v-1)+1.
    Returns (status, assignment, decisions): status 1 SAT, 0 UNSAT, 2 budget
    exhausted. The assignment fills unconstrained variables with +1.
    """
    assign = np.zeros(n + 1, dtype=np.int8)
    satcnt = np.zeros(m, dtype=np.int32)
    unass = np.zeros(m, dtype=np.int32)
    aocc = np.zeros(2 * n, dtype=np.int32)
    for c in range(m):
        unass[c] = cstart[c + 1] - cstart[c]
        for t in range(cstart[c], cstart[c + 1]):
            lit = clits[t]
            v = lit if lit > 0 else -lit
            aocc[2 * (v - 1) + (0 if lit > 0 else 1)] += 1
    not_sat = m  # clauses without a satisfied literal

    trail = np.empty(n, dtype=np.int32)
    tlen = 0
    dvar = np.empty(n + 2, dtype=np.int32)
    dphase = np.empty(n + 2, dtype=np.int8)
    dtried = np.empty(n + 2, dtype=np.int8)
    dmark = np.empty(n + 2, dtype=np.int32)
    dtop = 0

    qcap = 2 * n + m + 8
    queue = np.empty(qcap, dtype=np.int32)
    qhead = 0
    qtail = 0

    # per-branch MOMS scratch, stamped to avoid clearing
    score_p = np.zeros(n + 1, dtype=np.int32)
    score_n = np.zeros(n + 1, dtype=np.int32)
    stamp = np.zeros(n + 1, dtype=np.int64)
    cur_stamp = 0

    decisions = 0

    # seed the queue: unit clauses, then pure literals
    for c in range(m):
        if unass[c] == 1:
            queue[qtail] = clits[cstart[c]]
            qtail += 1
    if use_pure:
        for v in range(1, n + 1):
            pos = aocc[2 * (v - 1)]
            neg = aocc[2 * (v - 1) + 1]
            if pos > 0 and neg == 0:
                queue[qtail] = v
                qtail += 1
            elif neg > 0 and pos == 0:
                queue[qtail] = -v
                qtail += 1

    while True:
        # -- propagate to fixpoint ----------------------------------------
        conflict = False
        while qhead < qtail:
            lit = queue[qhead]
            qhead += 1
            v = lit if lit > 0 else -lit
            val = 1 if lit > 0 else -1
            if assign[v] != 0:
                if assign[v] != val:
                    conflict = True
                    break
                continue
            assign[v] = val
            trail[tlen] = v
            tlen += 1
            li = 2 * (v - 1) + (0 if lit > 0 else 1)
            # clauses satisfied by lit
            for o in range(ostart[li], ostart[li + 1]):
                c = ocls[o]
                satcnt[c] += 1
                if satcnt[c] == 1:
                    not_sat -= 1
                    for t in range(cstart[c], cstart[c + 1]):
                        l2 = clits[t]
                        v2 = l2 if l2 > 0 else -l2
                        i2 = 2 * (v2 - 1) + (0 if l2 > 0 else 1)
                        aocc[i2] -= 1
                        if use_pure and aocc[i2] == 0 and assign[v2] == 0 and aocc[i2 ^ 1] > 0:
                            queue[qtail] = -l2  # complement became pure
                            qtail += 1
            # clauses weakened by -lit; the loop always runs to completion so
            # the trail undo (which re-increments every clause of li2) stays
            # symmetric even when a conflict surfaces mid-loop
            li2 = li ^ 1
            for o in range(ostart[li2], ostart[li2 + 1]):
                c = ocls[o]
                unass[c] -= 1
                if satcnt[c] == 0:
                    if unass[c] == 0:
                        conflict = True
                    elif unass[c] == 1 and not conflict:
                        for t in range(cstart[c], cstart[c + 1]):
                            l2 = clits[t]
                            v2 = l2 if l2 > 0 else -l2
                            if assign[v2] == 0:
                                queue[qtail] = l2
                                qtail += 1
                                break
            if conflict:
                break

        if not conflict and not_sat == 0:
            out = np.empty(n + 1, dtype=np.int8)
            for v in range(n + 1):
                out[v] = assign[v] if assign[v] != 0 else 1
            return 1, out, decisions

        if conflict:
            # -- backtrack to the deepest decision with an untried phase ---
            while dtop > 0 and dtried[dtop] == 1:
                dtop -= 1
            if dtop == 0:
                return 0, np.zeros(n + 1, dtype=np.int8), decisions
            mark = dmark[dtop]
            for t in range(tlen - 1, mark - 1, -1):
                v = trail[t]
                val = assign[v]
                li = 2 * (v - 1) + (0 if val > 0 else 1)
                for o in range(ostart[li], ostart[li + 1]):
                    c = ocls[o]
                    satcnt[c] -= 1
                    if satcnt[c] == 0:
                        not_sat += 1
                        for tt in range(cstart[c], cstart[c + 1]):
                            l2 = clits[tt]
                            v2 = l2 if l2 > 0 else -l2
                            aocc[2 * (v2 - 1) + (0 if l2 > 0 else 1)] += 1
                li2 = li ^ 1
                for o in range(ostart[li2], ostart[li2 + 1]):
                    unass[ocls[o]] += 1
                assign[v] = 0
            tlen = mark
            dtried[dtop] = 1
            phase = -dphase[dtop]
            dphase[dtop] = phase
            qhead = 0
            qtail = 0
            queue[qtail] = dvar[dtop] * phase
            qtail += 1
            continue

        # -- branch: MOMS -------------------------------------------------
        decisions += 1
        if decisions > budget:
            return 2, np.zeros(n + 1, dtype=np.int8), decisions
        min_len = n + 1
        for c in range(m):
            if satcnt[c] == 0 and unass[c] < min_len:
                min_len = unass[c]
        cur_stamp += 1
        best_v = 0
        best_score = -1
        for c in range(m):
            if satcnt[c] == 0 and unass[c] == min_len:
                for t in range(cstart[c], cstart[c + 1]):
                    lit = clits[t]
                    v = lit if lit > 0 else -lit
                    if assign[v] != 0:
                        continue
                    if stamp[v] != cur_stamp:
                        stamp[v] = cur_stamp
                        score_p[v] = 0
                        score_n[v] = 0
                    if lit > 0:
                        score_p[v] += 1
                    else:
                        score_n[v] += 1
                    sc = score_p[v] + score_n[v]
                    if sc > best_score or (sc == best_score and v < best_v):
                        best_score = sc
                        best_v = v
        phase = 1 if score_p[best_v] >= score_n[best_v] else -1
        dtop += 1
        dvar[dtop] = best_v
        dphase[dtop] = phase
        dtried[dtop] = 0
        dmark[dtop] = tlen
        qhead = 0
        qtail = 0
        queue[qtail] = best_v * phase
        qtail += 1
