"""Compiled inner loops: grid kNN, marginal counts and the sliding-window engine.

All points live in the unit square. Distances are max-norm; neighbour ties
are broken by (distance, index) ascending. Marginal counts are inclusive.
Digamma sums are accumulated in fixed point (see ``FIXED_SCALE``) so that
adding then removing a point restores the sums bit for bit.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

FIXED_SCALE = float(2 ** 34)
RING_TOL = 1e-9
STAB_TOL = 1e-12
STACK_SIZE = 256


@njit(cache=True)
def cell_of(x, c):
    j = int(x * c)
    if j >= c:
        j = c - 1
    if j < 0:
        j = 0
    return j


@njit(cache=True)
def _topk_insert(kd, ki, filled, k, d, j):
    if filled == k:
        if d > kd[k - 1] or (d == kd[k - 1] and j > ki[k - 1]):
            return filled
        pos = k - 1
    else:
        pos = filled
        filled += 1
    while pos > 0 and (kd[pos - 1] > d or (kd[pos - 1] == d and ki[pos - 1] > j)):
        kd[pos] = kd[pos - 1]
        ki[pos] = ki[pos - 1]
        pos -= 1
    kd[pos] = d
    ki[pos] = j
    return filled


@njit(cache=True)
def band_bounds(s, x, d, lo0, hi0):
    """Half-open position range of sorted ``s`` with ``|s[p] - x| <= d``."""
    lo, hi = lo0, hi0
    while lo < hi:
        mid = (lo + hi) >> 1
        if x - s[mid] <= d:
            hi = mid
        else:
            lo = mid + 1
    left = lo
    hi = hi0
    while lo < hi:
        mid = (lo + hi) >> 1
        if s[mid] - x > d:
            hi = mid
        else:
            lo = mid + 1
    return left, lo


# ---------------------------------------------------------------------------
# batch path: static CSR grid


@njit(cache=True)
def _csr_grid(u, v, c):
    n = len(u)
    cu = np.empty(n, np.int64)
    cv = np.empty(n, np.int64)
    start = np.zeros(c * c + 1, np.int64)
    for i in range(n):
        cu[i] = cell_of(u[i], c)
        cv[i] = cell_of(v[i], c)
        start[cu[i] * c + cv[i] + 1] += 1
    for q in range(c * c):
        start[q + 1] += start[q]
    fill = start[:-1].copy()
    pts = np.empty(n, np.int64)
    for i in range(n):
        q = cu[i] * c + cv[i]
        pts[fill[q]] = i
        fill[q] += 1
    return cu, cv, start, pts


@njit(cache=True)
def _csr_scan(u, v, i, start, pts, q, kd, ki, filled, k):
    for p in range(start[q], start[q + 1]):
        j = pts[p]
        if j != i:
            d = max(abs(u[j] - u[i]), abs(v[j] - v[i]))
            filled = _topk_insert(kd, ki, filled, k, d, j)
    return filled


@njit(cache=True)
def _csr_knn(u, v, i, k, c, cu, cv, start, pts, kd, ki):
    ci = cu[i]
    cj = cv[i]
    filled = 0
    r = 0
    while True:
        a0 = ci - r
        a1 = ci + r
        b0 = cj - r
        b1 = cj + r
        for a in range(max(a0, 0), min(a1, c - 1) + 1):
            if a == a0 or a == a1:
                for b in range(max(b0, 0), min(b1, c - 1) + 1):
                    filled = _csr_scan(u, v, i, start, pts, a * c + b, kd, ki, filled, k)
            else:
                if b0 >= 0:
                    filled = _csr_scan(u, v, i, start, pts, a * c + b0, kd, ki, filled, k)
                if b1 <= c - 1:
                    filled = _csr_scan(u, v, i, start, pts, a * c + b1, kd, ki, filled, k)
        if filled == k and kd[k - 1] < r / c - RING_TOL:
            break
        if a0 <= 0 and b0 <= 0 and a1 >= c - 1 and b1 >= c - 1:
            break
        r += 1
    return filled


@njit(cache=True)
def batch_records(u, v, k, c):
    """kNN and marginal-count records for every point of a static set."""
    n = len(u)
    cu, cv, start, pts = _csr_grid(u, v, c)
    su = np.sort(u)
    sv = np.sort(v)
    kth = np.empty(n, np.int64)
    dx = np.empty(n, np.float64)
    dy = np.empty(n, np.float64)
    nx = np.empty(n, np.int64)
    ny = np.empty(n, np.int64)
    kd = np.empty(k, np.float64)
    ki = np.empty(k, np.int64)
    for i in range(n):
        _csr_knn(u, v, i, k, c, cu, cv, start, pts, kd, ki)
        ex = 0.0
        ey = 0.0
        for m in range(k):
            j = ki[m]
            ex = max(ex, abs(u[j] - u[i]))
            ey = max(ey, abs(v[j] - v[i]))
        kth[i] = ki[k - 1]
        dx[i] = ex
        dy[i] = ey
        lo, hi = band_bounds(su, u[i], ex, 0, n)
        nx[i] = hi - lo - 1
        lo, hi = band_bounds(sv, v[i], ey, 0, n)
        ny[i] = hi - lo - 1
    return kth, dx, dy, nx, ny


@njit(cache=True)
def fixed_sum(psi_fixed, counts):
    s = 0
    for c in counts:
        s += psi_fixed[max(c, 1)]
    return s


# ---------------------------------------------------------------------------
# linked-list grid shared by BoxGrid and the window engine


@njit(cache=True)
def ll_insert(head, nxt, prv, cu, cv, c, i):
    q = cu[i] * c + cv[i]
    h = head[q]
    nxt[i] = h
    prv[i] = -1
    if h != -1:
        prv[h] = i
    head[q] = i


@njit(cache=True)
def ll_remove(head, nxt, prv, cu, cv, c, i):
    q = cu[i] * c + cv[i]
    if prv[i] != -1:
        nxt[prv[i]] = nxt[i]
    else:
        head[q] = nxt[i]
    if nxt[i] != -1:
        prv[nxt[i]] = prv[i]
    nxt[i] = -1
    prv[i] = -1


@njit(cache=True)
def _ll_scan(u, v, i, head, nxt, q, kd, ki, filled, k):
    j = head[q]
    while j != -1:
        if j != i:
            d = max(abs(u[j] - u[i]), abs(v[j] - v[i]))
            filled = _topk_insert(kd, ki, filled, k, d, j)
        j = nxt[j]
    return filled


@njit(cache=True)
def ll_knn(u, v, i, k, c, cu, cv, head, nxt, kd, ki):
    ci = cu[i]
    cj = cv[i]
    filled = 0
    r = 0
    while True:
        a0 = ci - r
        a1 = ci + r
        b0 = cj - r
        b1 = cj + r
        for a in range(max(a0, 0), min(a1, c - 1) + 1):
            if a == a0 or a == a1:
                for b in range(max(b0, 0), min(b1, c - 1) + 1):
                    filled = _ll_scan(u, v, i, head, nxt, a * c + b, kd, ki, filled, k)
            else:
                if b0 >= 0:
                    filled = _ll_scan(u, v, i, head, nxt, a * c + b0, kd, ki, filled, k)
                if b1 <= c - 1:
                    filled = _ll_scan(u, v, i, head, nxt, a * c + b1, kd, ki, filled, k)
        if filled == k and kd[k - 1] < r / c - RING_TOL:
            break
        if a0 <= 0 and b0 <= 0 and a1 >= c - 1 and b1 >= c - 1:
            break
        r += 1
    return filled


# ---------------------------------------------------------------------------
# window engine

WinArrays = namedtuple(
    "WinArrays",
    [
        "u", "v", "cu", "cv", "head", "nxt", "prv",
        "pos_u", "pos_v", "su", "sv", "ord_u", "ord_v", "fen_u", "fen_v",
        "tlo_u", "thi_u", "tlo_v", "thi_v",
        "kth", "dx", "dy", "nx", "ny", "valid", "member",
        "psi_fixed", "meta", "stamp", "buf", "redo", "stack", "kd", "ki",
    ],
)

# meta slots
M_C, M_K, M_NMEM, M_SX, M_SY, M_P, M_STAMP = 0, 1, 2, 3, 4, 5, 6


def new_window_arrays(u, v, k, c, psi_fixed):
    """Allocate engine arrays for a local domain of ``len(u)`` points."""
    m = len(u)
    order_u = np.argsort(u, kind="stable")
    order_v = np.argsort(v, kind="stable")
    pos_u = np.empty(m, np.int64)
    pos_u[order_u] = np.arange(m)
    pos_v = np.empty(m, np.int64)
    pos_v[order_v] = np.arange(m)
    P = 1
    while P < m:
        P *= 2
    meta = np.zeros(8, np.int64)
    meta[M_C] = c
    meta[M_K] = k
    meta[M_P] = P
    return WinArrays(
        u=u, v=v,
        cu=np.minimum((u * c).astype(np.int64), c - 1),
        cv=np.minimum((v * c).astype(np.int64), c - 1),
        head=np.full(c * c, -1, np.int64),
        nxt=np.full(m, -1, np.int64),
        prv=np.full(m, -1, np.int64),
        pos_u=pos_u, pos_v=pos_v,
        su=u[order_u].copy(), sv=v[order_v].copy(),
        ord_u=order_u.astype(np.int64), ord_v=order_v.astype(np.int64),
        fen_u=np.zeros(m + 1, np.int64), fen_v=np.zeros(m + 1, np.int64),
        tlo_u=np.full(2 * P, np.inf), thi_u=np.full(2 * P, -np.inf),
        tlo_v=np.full(2 * P, np.inf), thi_v=np.full(2 * P, -np.inf),
        kth=np.full(m, -1, np.int64),
        dx=np.zeros(m), dy=np.zeros(m),
        nx=np.zeros(m, np.int64), ny=np.zeros(m, np.int64),
        valid=np.zeros(m, np.uint8), member=np.zeros(m, np.uint8),
        psi_fixed=psi_fixed, meta=meta,
        stamp=np.zeros(m, np.int64),
        buf=np.empty(m, np.int64), redo=np.empty(m, np.int64),
        stack=np.empty(STACK_SIZE, np.int64),
        kd=np.empty(k, np.float64), ki=np.empty(k, np.int64),
    )


@njit(cache=True)
def _fen_add(f, pos, delta):
    p = pos + 1
    n = len(f)
    while p < n:
        f[p] += delta
        p += p & (-p)


@njit(cache=True)
def _fen_prefix(f, pos):
    # number of members at sorted positions < pos
    s = 0
    p = pos
    while p > 0:
        s += f[p]
        p -= p & (-p)
    return s


@njit(cache=True)
def _tree_set(lo_t, hi_t, P, pos, lo, hi):
    p = P + pos
    lo_t[p] = lo
    hi_t[p] = hi
    p >>= 1
    while p >= 1:
        a = 2 * p
        lo_t[p] = min(lo_t[a], lo_t[a + 1])
        hi_t[p] = max(hi_t[a], hi_t[a + 1])
        p >>= 1


@njit(cache=True)
def _set_leaves(S, i):
    P = S.meta[M_P]
    if S.valid[i]:
        _tree_set(S.tlo_u, S.thi_u, P, S.pos_u[i], S.u[i] - S.dx[i], S.u[i] + S.dx[i])
        _tree_set(S.tlo_v, S.thi_v, P, S.pos_v[i], S.v[i] - S.dy[i], S.v[i] + S.dy[i])
    else:
        _tree_set(S.tlo_u, S.thi_u, P, S.pos_u[i], np.inf, -np.inf)
        _tree_set(S.tlo_v, S.thi_v, P, S.pos_v[i], np.inf, -np.inf)


@njit(cache=True)
def _compute_record(S, i):
    k = S.meta[M_K]
    c = S.meta[M_C]
    m = len(S.u)
    ll_knn(S.u, S.v, i, k, c, S.cu, S.cv, S.head, S.nxt, S.kd, S.ki)
    ex = 0.0
    ey = 0.0
    for q in range(k):
        j = S.ki[q]
        ex = max(ex, abs(S.u[j] - S.u[i]))
        ey = max(ey, abs(S.v[j] - S.v[i]))
    lo, hi = band_bounds(S.su, S.u[i], ex, 0, m)
    cx = _fen_prefix(S.fen_u, hi) - _fen_prefix(S.fen_u, lo) - 1
    lo, hi = band_bounds(S.sv, S.v[i], ey, 0, m)
    cy = _fen_prefix(S.fen_v, hi) - _fen_prefix(S.fen_v, lo) - 1
    S.kth[i] = S.ki[k - 1]
    S.dx[i] = ex
    S.dy[i] = ey
    S.nx[i] = cx
    S.ny[i] = cy
    S.valid[i] = 1
    S.meta[M_SX] += S.psi_fixed[max(cx, 1)]
    S.meta[M_SY] += S.psi_fixed[max(cy, 1)]
    _set_leaves(S, i)


@njit(cache=True)
def _invalidate(S, i):
    if S.valid[i]:
        S.meta[M_SX] -= S.psi_fixed[max(S.nx[i], 1)]
        S.meta[M_SY] -= S.psi_fixed[max(S.ny[i], 1)]
        S.valid[i] = 0
        _set_leaves(S, i)


@njit(cache=True)
def _stab(S, lo_t, hi_t, order, coord, width, x, self_i, st, n):
    # collect valid j with |coord[j] - x| <= width[j]
    P = S.meta[M_P]
    stack = S.stack
    top = 0
    stack[0] = 1
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if lo_t[node] > x + STAB_TOL or hi_t[node] < x - STAB_TOL:
            continue
        if node >= P:
            j = order[node - P]
            if j != self_i and S.stamp[j] != st and S.valid[j]:
                if abs(coord[j] - x) <= width[j]:
                    S.stamp[j] = st
                    S.buf[n] = j
                    n += 1
        else:
            stack[top] = 2 * node
            stack[top + 1] = 2 * node + 1
            top += 2
    return n


@njit(cache=True)
def _collect_affected(S, i):
    S.meta[M_STAMP] += 1
    st = S.meta[M_STAMP]
    n = _stab(S, S.tlo_u, S.thi_u, S.ord_u, S.u, S.dx, S.u[i], i, st, 0)
    n = _stab(S, S.tlo_v, S.thi_v, S.ord_v, S.v, S.dy, S.v[i], i, st, n)
    return n


@njit(cache=True)
def _enough(S):
    return S.meta[M_NMEM] - 1 >= S.meta[M_K]


@njit(cache=True)
def win_add(S, i):
    """Insert local point ``i``; returns the number of affected records."""
    c = S.meta[M_C]
    ll_insert(S.head, S.nxt, S.prv, S.cu, S.cv, c, i)
    _fen_add(S.fen_u, S.pos_u[i], 1)
    _fen_add(S.fen_v, S.pos_v[i], 1)
    S.member[i] = 1
    S.meta[M_NMEM] += 1
    n = _collect_affected(S, i)
    nre = 0
    for q in range(n):
        j = S.buf[q]
        du = abs(S.u[i] - S.u[j])
        dv = abs(S.v[i] - S.v[j])
        d = max(du, dv)
        kj = S.kth[j]
        eps = max(abs(S.u[kj] - S.u[j]), abs(S.v[kj] - S.v[j]))
        if d < eps or (d == eps and i < kj):
            S.redo[nre] = j
            nre += 1
        else:
            if du <= S.dx[j]:
                S.meta[M_SX] += S.psi_fixed[S.nx[j] + 1] - S.psi_fixed[max(S.nx[j], 1)]
                S.nx[j] += 1
            if dv <= S.dy[j]:
                S.meta[M_SY] += S.psi_fixed[S.ny[j] + 1] - S.psi_fixed[max(S.ny[j], 1)]
                S.ny[j] += 1
    for q in range(nre):
        j = S.redo[q]
        _invalidate(S, j)
        _compute_record(S, j)
    if _enough(S):
        _compute_record(S, i)
    return n


@njit(cache=True)
def win_remove(S, i):
    """Delete local point ``i``; returns the number of affected records."""
    c = S.meta[M_C]
    _invalidate(S, i)
    S.kth[i] = -1
    ll_remove(S.head, S.nxt, S.prv, S.cu, S.cv, c, i)
    _fen_add(S.fen_u, S.pos_u[i], -1)
    _fen_add(S.fen_v, S.pos_v[i], -1)
    S.member[i] = 0
    S.meta[M_NMEM] -= 1
    n = _collect_affected(S, i)
    nre = 0
    ok = _enough(S)
    for q in range(n):
        j = S.buf[q]
        du = abs(S.u[i] - S.u[j])
        dv = abs(S.v[i] - S.v[j])
        d = max(du, dv)
        kj = S.kth[j]
        eps = max(abs(S.u[kj] - S.u[j]), abs(S.v[kj] - S.v[j]))
        if d < eps or (d == eps and i <= kj):
            S.redo[nre] = j
            nre += 1
        else:
            if du <= S.dx[j]:
                S.meta[M_SX] += S.psi_fixed[max(S.nx[j] - 1, 1)] - S.psi_fixed[max(S.nx[j], 1)]
                S.nx[j] -= 1
            if dv <= S.dy[j]:
                S.meta[M_SY] += S.psi_fixed[max(S.ny[j] - 1, 1)] - S.psi_fixed[max(S.ny[j], 1)]
                S.ny[j] -= 1
    for q in range(nre):
        j = S.redo[q]
        _invalidate(S, j)
        if ok:
            _compute_record(S, j)
    return n


@njit(cache=True)
def win_settle(S, lo, hi):
    """Compute any missing records among members in local ``[lo, hi)``."""
    if not _enough(S):
        return 0
    done = 0
    for i in range(lo, hi):
        if S.member[i] and not S.valid[i]:
            _compute_record(S, i)
            done += 1
    return done


@njit(cache=True)
def win_fill(S, lo, hi):
    """Insert ``[lo, hi)`` into an empty engine and compute records from scratch."""
    c = S.meta[M_C]
    for i in range(lo, hi):
        ll_insert(S.head, S.nxt, S.prv, S.cu, S.cv, c, i)
        _fen_add(S.fen_u, S.pos_u[i], 1)
        _fen_add(S.fen_v, S.pos_v[i], 1)
        S.member[i] = 1
    S.meta[M_NMEM] += hi - lo
    return win_settle(S, lo, hi)


@njit(cache=True)
def win_clear(S, lo, hi):
    """Drop every member in local ``[lo, hi)`` without affected-set work."""
    c = S.meta[M_C]
    for i in range(lo, hi):
        if S.member[i]:
            _invalidate(S, i)
            S.kth[i] = -1
            ll_remove(S.head, S.nxt, S.prv, S.cu, S.cv, c, i)
            _fen_add(S.fen_u, S.pos_u[i], -1)
            _fen_add(S.fen_v, S.pos_v[i], -1)
            S.member[i] = 0
            S.meta[M_NMEM] -= 1


@njit(cache=True)
def win_slide(S, s0, e0, s1, e1):
    """Move the member range from local [s0, e0) to [s1, e1): remove, add, settle."""
    touched = 0
    for i in range(s0, e0):
        if i < s1 or i >= e1:
            touched += win_remove(S, i)
    for i in range(s1, e1):
        if i < s0 or i >= e0:
            touched += win_add(S, i)
    win_settle(S, s1, e1)
    return touched


# ---------------------------------------------------------------------------
# distance correlation


@njit(cache=True)
def _row_means(x):
    n = len(x)
    a = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += abs(x[i] - x[j])
        a[i] = s / n
    return a


@njit(cache=True)
def dcor_sums(x, y):
    """Mean products of doubly-centred distance matrices, O(n) memory."""
    n = len(x)
    ax = _row_means(x)
    ay = _row_means(y)
    mx = ax.mean()
    my = ay.mean()
    sxy = 0.0
    sxx = 0.0
    syy = 0.0
    for i in range(n):
        for j in range(n):
            A = abs(x[i] - x[j]) - ax[i] - ax[j] + mx
            B = abs(y[i] - y[j]) - ay[i] - ay[j] + my
            sxy += A * B
            sxx += A * A
            syy += B * B
    nn = float(n) * n
    return sxy / nn, sxx / nn, syy / nn
