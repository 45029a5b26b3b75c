"""Hot inner loops, each with a numba and a plain-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``PPGTUNE_DISABLE_NUMBA`` is unset (or ``0``/``false``). Both paths
are kept importable under explicit names (``*_nb`` / ``*_np``) so tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""
import os

import numpy as np
from scipy import signal as _sps

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

_flag = os.environ.get("PPGTUNE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = NUMBA_AVAILABLE and _flag in ("", "0", "false", "no")


def _jit(fn):
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# cascaded biquads, transposed direct form II


def _sosfilt_loop(sos, x, zi):
    n_sec = sos.shape[0]
    y = np.empty(x.shape[0])
    z = zi.copy()
    for t in range(x.shape[0]):
        v = x[t]
        for s in range(n_sec):
            b0 = sos[s, 0]
            b1 = sos[s, 1]
            b2 = sos[s, 2]
            a1 = sos[s, 4]
            a2 = sos[s, 5]
            out = b0 * v + z[s, 0]
            z[s, 0] = b1 * v - a1 * out + z[s, 1]
            z[s, 1] = b2 * v - a2 * out
            v = out
        y[t] = v
    return y, z


sosfilt_nb = _jit(_sosfilt_loop)


def sosfilt_np(sos, x, zi):
    # numpy has no recursive primitive; scipy's compiled sosfilt is the fallback
    y, zf = _sps.sosfilt(sos, x, zi=zi)
    return y, zf


# ---------------------------------------------------------------------------
# one-to-one beat matching on the time axis


def _match_pairs_loop(a, b, tol):
    # Earliest-feasible two-pointer sweep. For equal-width tolerance intervals
    # this yields a maximum-cardinality matching.
    n = a.shape[0]
    m = b.shape[0]
    ia = np.empty(min(n, m), dtype=np.int64)
    ib = np.empty(min(n, m), dtype=np.int64)
    i = 0
    j = 0
    k = 0
    while i < n and j < m:
        d = a[i] - b[j]
        if d > tol:
            j += 1
        elif d < -tol:
            i += 1
        else:
            ia[k] = i
            ib[k] = j
            k += 1
            i += 1
            j += 1
    return ia[:k], ib[:k]


match_pairs_nb = _jit(_match_pairs_loop)


def match_pairs_np(a, b, tol):
    ia = []
    ib = []
    i = j = 0
    n, m = len(a), len(b)
    while i < n and j < m:
        d = a[i] - b[j]
        if d > tol:
            j += 1
        elif d < -tol:
            i += 1
        else:
            ia.append(i)
            ib.append(j)
            i += 1
            j += 1
    return np.asarray(ia, dtype=np.int64), np.asarray(ib, dtype=np.int64)


def _lag_scan_loop(a, b, lags, tol):
    counts = np.zeros(lags.shape[0], dtype=np.int64)
    n = a.shape[0]
    m = b.shape[0]
    for li in range(lags.shape[0]):
        lag = lags[li]
        i = 0
        j = 0
        c = 0
        while i < n and j < m:
            d = a[i] + lag - b[j]
            if d > tol:
                j += 1
            elif d < -tol:
                i += 1
            else:
                c += 1
                i += 1
                j += 1
        counts[li] = c
    return counts


lag_scan_nb = _jit(_lag_scan_loop)


def lag_scan_np(a, b, lags, tol):
    # Runs the two-pointer sweep for every lag at once, one step per iteration.
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lags = np.asarray(lags, dtype=np.int64)
    n, m = len(a), len(b)
    counts = np.zeros(len(lags), dtype=np.int64)
    if n == 0 or m == 0:
        return counts
    i = np.zeros(len(lags), dtype=np.int64)
    j = np.zeros(len(lags), dtype=np.int64)
    active = np.ones(len(lags), dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        d = a[i[idx]] + lags[idx] - b[j[idx]]
        late = d > tol
        early = d < -tol
        hit = ~(late | early)
        j[idx[late]] += 1
        i[idx[early]] += 1
        counts[idx[hit]] += 1
        i[idx[hit]] += 1
        j[idx[hit]] += 1
        active = (i < n) & (j < m)
    return counts


# ---------------------------------------------------------------------------
# fast non-dominated sorting (all objectives minimized)


def _front_rank_loop(f):
    n = f.shape[0]
    k = f.shape[1]
    dom_count = np.zeros(n, dtype=np.int64)
    dominated = np.zeros((n, n), dtype=np.bool_)
    for p in range(n):
        for q in range(p + 1, n):
            p_le = True
            q_le = True
            p_lt = False
            q_lt = False
            for o in range(k):
                if f[p, o] > f[q, o]:
                    p_le = False
                    q_lt = True
                elif f[p, o] < f[q, o]:
                    q_le = False
                    p_lt = True
            if p_le and p_lt:
                dominated[p, q] = True
                dom_count[q] += 1
            elif q_le and q_lt:
                dominated[q, p] = True
                dom_count[p] += 1
    rank = np.full(n, -1, dtype=np.int64)
    current = np.empty(n, dtype=np.int64)
    n_cur = 0
    for p in range(n):
        if dom_count[p] == 0:
            current[n_cur] = p
            n_cur += 1
            rank[p] = 0
    r = 0
    nxt = np.empty(n, dtype=np.int64)
    while n_cur > 0:
        n_nxt = 0
        for ci in range(n_cur):
            p = current[ci]
            for q in range(n):
                if dominated[p, q]:
                    dom_count[q] -= 1
                    if dom_count[q] == 0:
                        rank[q] = r + 1
                        nxt[n_nxt] = q
                        n_nxt += 1
        r += 1
        for ci in range(n_nxt):
            current[ci] = nxt[ci]
        n_cur = n_nxt
    return rank


front_rank_nb = _jit(_front_rank_loop)


def front_rank_np(f):
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    le = np.all(f[:, None, :] <= f[None, :, :], axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :], axis=2)
    dominates = le & lt  # dominates[p, q]: p dominates q
    rank = np.full(n, -1, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    r = 0
    while remaining.any():
        sub = dominates[np.ix_(remaining, remaining)]
        free = ~sub.any(axis=0)
        idx = np.flatnonzero(remaining)[free]
        rank[idx] = r
        remaining[idx] = False
        r += 1
    return rank


# ---------------------------------------------------------------------------
# greedy peak selection with a refractory distance


def _select_peaks_loop(idx, heights, min_dist):
    order = np.argsort(-heights, kind="mergesort")
    keep = np.zeros(idx.shape[0], dtype=np.bool_)
    taken = np.empty(idx.shape[0], dtype=np.int64)
    n_taken = 0
    for oi in range(order.shape[0]):
        c = order[oi]
        ok = True
        for t in range(n_taken):
            if abs(idx[c] - taken[t]) < min_dist:
                ok = False
                break
        if ok:
            keep[c] = True
            taken[n_taken] = idx[c]
            n_taken += 1
    return keep


select_peaks_nb = _jit(_select_peaks_loop)


def select_peaks_np(idx, heights, min_dist):
    idx = np.asarray(idx, dtype=np.int64)
    order = np.argsort(-np.asarray(heights), kind="mergesort")
    keep = np.zeros(len(idx), dtype=bool)
    blocked = np.zeros(len(idx), dtype=bool)
    for c in order:
        if blocked[c]:
            continue
        keep[c] = True
        lo = np.searchsorted(idx, idx[c] - min_dist, side="right")
        hi = np.searchsorted(idx, idx[c] + min_dist, side="left")
        blocked[lo:hi] = True
    return keep


if USE_NUMBA:
    sosfilt = sosfilt_nb
    match_pairs = match_pairs_nb
    lag_scan = lag_scan_nb
    front_rank = front_rank_nb
    select_peaks = select_peaks_nb
else:
    sosfilt = sosfilt_np
    match_pairs = match_pairs_np
    lag_scan = lag_scan_np
    front_rank = front_rank_np
    select_peaks = select_peaks_np
