"""Event loop for the gap (queue) process, in kernel form.

One function body, two backends: the plain-Python twin and the numba-jitted
compile of the *same* function object.  Both consume the identical
pre-drawn random blocks, so given equal inputs they must produce
byte-identical outputs; the test suite enforces that, which keeps the fast
path honest.

State layout (1-based queue indices, slot 0 unused):
  u[k]    customers at queue k
  wq[k]   current sampling weight: a[k+1] + b[k] if u[k] > 0 else 0
  tree    Fenwick tree over wq, size nfen (power of two), tree[nfen] = total
  a, b    rate tables, valid for k = 1 .. len-2

Events (rate logic):
  arrival            rate a1:           u[1] += 1, X1 -= 1
  queue k, right     rate a[k+1]:       u[k] -= 1, u[k+1] += 1
  queue k, left>=2   rate b[k]:         u[k] -= 1, u[k-1] += 1
  queue 1, exit      rate b[1]:         u[1] -= 1, X1 += 1

One exponential and one uniform are consumed per proposed event; a proposal
landing past t_stop is discarded (memorylessness makes the restart exact).
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

# exit reasons
DONE = 0
NEED_RANDOM = 1
XBUF_FULL = 2
EVBUF_FULL = 3
FRONTIER = 4
RESYNC = 5

# i64 register indices
I_X1 = 0
I_TOTAL = 1
I_NEV = 2
I_MAXK = 3
I_RI = 4
I_X1LEN = 5
I_EVLEN = 6

# f64 register indices
F_T = 0
F_W = 1

# event kind codes
EV_ARRIVE = 0
EV_EXIT = 1
EV_RIGHT = 2
EV_LEFT = 3


def _kernel_body(a, b, u, wq, tree, nfen, a1, t_stop, k_limit,
                 f64, i64, eb, ub, x1_t, x1_v, log_on, ev_t, ev_kind, ev_k):
    t = f64[F_T]
    W = f64[F_W]
    X1 = i64[I_X1]
    total = i64[I_TOTAL]
    nev = i64[I_NEV]
    max_k = i64[I_MAXK]
    ri = i64[I_RI]
    x1_len = i64[I_X1LEN]
    ev_len = i64[I_EVLEN]
    nrand = eb.shape[0]
    xcap = x1_t.shape[0]
    ecap = ev_t.shape[0]

    reason = DONE
    while True:
        if ri >= nrand:
            reason = NEED_RANDOM
            break
        if x1_len + 1 > xcap:
            reason = XBUF_FULL
            break
        if log_on and ev_len + 1 > ecap:
            reason = EVBUF_FULL
            break
        if max_k + 1 > k_limit:
            reason = FRONTIER
            break
        R = a1 + W
        dt = eb[ri] / R
        if t + dt >= t_stop:
            t = t_stop
            ri += 1
            reason = DONE
            break
        x = ub[ri] * R
        t = t + dt
        ri += 1

        if x < a1:
            # arrival to queue 1
            if u[1] == 0:
                w = a[2] + b[1]
                wq[1] = w
                i = 1
                while i <= nfen:
                    tree[i] += w
                    i += i & (-i)
                W += w
            u[1] += 1
            X1 -= 1
            total += 1
            if max_k < 1:
                max_k = 1
            x1_t[x1_len] = t
            x1_v[x1_len] = X1
            x1_len += 1
            if log_on:
                ev_t[ev_len] = t
                ev_kind[ev_len] = EV_ARRIVE
                ev_k[ev_len] = 1
                ev_len += 1
        else:
            # pick an occupied queue proportionally to wq via Fenwick descent
            target = x - a1
            idx = 0
            bit = nfen
            rem = target
            while bit > 0:
                nxt = idx + bit
                if nxt <= nfen and tree[nxt] <= rem:
                    rem -= tree[nxt]
                    idx = nxt
                bit >>= 1
            k = idx + 1
            if k > nfen or u[k] == 0:
                # float drift sent the target past the true total
                reason = RESYNC
                break
            if rem < a[k + 1]:
                # customer moves right
                u[k] -= 1
                if u[k] == 0:
                    w = wq[k]
                    wq[k] = 0.0
                    i = k
                    while i <= nfen:
                        tree[i] -= w
                        i += i & (-i)
                    W -= w
                k2 = k + 1
                if u[k2] == 0:
                    w = a[k2 + 1] + b[k2]
                    wq[k2] = w
                    i = k2
                    while i <= nfen:
                        tree[i] += w
                        i += i & (-i)
                    W += w
                u[k2] += 1
                if k2 > max_k:
                    max_k = k2
                if log_on:
                    ev_t[ev_len] = t
                    ev_kind[ev_len] = EV_RIGHT
                    ev_k[ev_len] = k
                    ev_len += 1
            else:
                # customer moves left; at queue 1 it exits the system
                u[k] -= 1
                if u[k] == 0:
                    w = wq[k]
                    wq[k] = 0.0
                    i = k
                    while i <= nfen:
                        tree[i] -= w
                        i += i & (-i)
                    W -= w
                if k == 1:
                    X1 += 1
                    total -= 1
                    x1_t[x1_len] = t
                    x1_v[x1_len] = X1
                    x1_len += 1
                    if log_on:
                        ev_t[ev_len] = t
                        ev_kind[ev_len] = EV_EXIT
                        ev_k[ev_len] = 1
                        ev_len += 1
                else:
                    k2 = k - 1
                    if u[k2] == 0:
                        w = a[k2 + 1] + b[k2]
                        wq[k2] = w
                        i = k2
                        while i <= nfen:
                            tree[i] += w
                            i += i & (-i)
                        W += w
                    u[k2] += 1
                    if log_on:
                        ev_t[ev_len] = t
                        ev_kind[ev_len] = EV_LEFT
                        ev_k[ev_len] = k
                        ev_len += 1
        nev += 1

    f64[F_T] = t
    f64[F_W] = W
    i64[I_X1] = X1
    i64[I_TOTAL] = total
    i64[I_NEV] = nev
    i64[I_MAXK] = max_k
    i64[I_RI] = ri
    i64[I_X1LEN] = x1_len
    i64[I_EVLEN] = ev_len
    return reason


kernel_py = _kernel_body
if HAVE_NUMBA:
    kernel_jit = njit(cache=True, nogil=True)(_kernel_body)
else:  # pragma: no cover
    kernel_jit = _kernel_body


def rebuild_tree(wq: np.ndarray, tree: np.ndarray, nfen: int) -> float:
    """Recompute the Fenwick tree from leaf weights; returns the exact total."""
    csum = np.concatenate(([0.0], np.cumsum(wq[1 : nfen + 1])))
    idx = np.arange(1, nfen + 1, dtype=np.int64)
    tree[0] = 0.0
    tree[1:] = csum[idx] - csum[idx - (idx & -idx)]
    return float(csum[nfen])
