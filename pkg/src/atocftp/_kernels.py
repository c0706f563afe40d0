"""Compiled inner loops for the CFTP samplers.

Events are encoded as parallel arrays: ``kind`` (0 demand, 1 individual
service, 2 joint return), ``arg`` (subset mask or item), ``level`` (``j``) and
``thr`` (service-rate threshold of individual services).  These loops mirror
the reference implementations in ``individual``, ``joint`` and ``cftp``; the
test-suite checks them against each other.
"""

import numba as nb
import numpy as np

PSA = 0  # POS, bottom and top trajectories
EPSA = 1  # TOS envelope
AEPSA = 2  # aggregated envelope, stop once lo == hi at some step
ALG4 = 3  # aggregated envelope, stop once every component met at some step
SUP = 4  # supremum chain from the top, stop once it hits zero

_G = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@nb.njit(cache=True)
def uniform(key, t):
    z = key + np.uint64(t) * _G + _G
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return np.float64(z >> np.uint64(11)) * 1.1102230246251565e-16


@nb.njit(cache=True)
def draw(key, t, alias_thr, alias_idx):
    n = alias_thr.shape[0]
    v = uniform(key, t) * n
    col = int(v)
    if col > n - 1:
        col = n - 1
    if v - col < alias_thr[col]:
        return col
    return alias_idx[col]


@nb.njit(cache=True)
def _pos_demand(x, mask, caps):
    for k in range(x.shape[0]):
        if (mask >> k) & 1 and x[k] < caps[k]:
            x[k] += 1


@nb.njit(cache=True)
def _tos_demand(x, mask, caps):
    for k in range(x.shape[0]):
        if (mask >> k) & 1 and x[k] >= caps[k]:
            return
    for k in range(x.shape[0]):
        if (mask >> k) & 1:
            x[k] += 1


@nb.njit(cache=True)
def _serve(x, i, thr, mu):
    if mu[i, x[i]] >= thr:
        x[i] -= 1


@nb.njit(cache=True)
def _sup_return(x, i, j):
    prefix = 0
    for q in range(i):
        prefix += x[q]
    x_hat = x[i] - prefix
    if j <= x_hat:
        x[i] -= 1


@nb.njit(cache=True)
def _tos_envelope(lo, hi, mask, caps):
    n_full = 0
    full = -1
    for k in range(lo.shape[0]):
        if (mask >> k) & 1:
            if lo[k] >= caps[k]:
                return
            if hi[k] >= caps[k]:
                n_full += 1
                full = k
    if n_full == 0:
        for k in range(lo.shape[0]):
            if (mask >> k) & 1:
                lo[k] += 1
                hi[k] += 1
        return
    _pos_demand(hi, mask, caps)
    if n_full == 1:
        lo[full] += 1


@nb.njit(cache=True)
def _agg_return(lo, hi, i, j):
    mi = lo[i]
    Mi = hi[i]
    run = 0
    for p in range(i + 1, lo.shape[0]):
        lim = run + lo[p]
        if Mi < lim:
            lim = Mi
        if lo[p] > 0 and j <= lim:
            lo[p] -= 1
        run += hi[p]
    if j <= mi:
        lo[i] -= 1
    _sup_return(hi, i, j)


@nb.njit(cache=True)
def apply_event(mode, lo, hi, e, caps, mu, kind, arg, level, thr):
    k = kind[e]
    a = arg[e]
    if k == 0:
        if mode == EPSA:
            if a & (a - 1) == 0:
                _pos_demand(lo, a, caps)
                _pos_demand(hi, a, caps)
            else:
                _tos_envelope(lo, hi, a, caps)
        else:
            if mode != SUP:
                _pos_demand(lo, a, caps)
            _pos_demand(hi, a, caps)
    elif k == 1:
        _serve(lo, a, thr[e], mu)
        _serve(hi, a, thr[e], mu)
    else:
        if mode == SUP:
            _sup_return(hi, a, level[e])
        else:
            _agg_return(lo, hi, a, level[e])


@nb.njit(cache=True)
def _equal(lo, hi):
    for k in range(lo.shape[0]):
        if lo[k] != hi[k]:
            return False
    return True


@nb.njit(cache=True)
def _is_zero(x):
    for k in range(x.shape[0]):
        if x[k] != 0:
            return False
    return True


@nb.njit(cache=True)
def run_window(mode, key, horizon, lo, hi, caps, mu, kind, arg, level, thr,
               alias_thr, alias_idx):
    """Apply events ``horizon-1 .. 0`` from ``[bottom, top]``.

    Returns ``(stop, t_hit)``: whether the stopping predicate of ``mode``
    holds, and for SUP the smallest backward index after which the supremum
    chain sat at zero (-1 if never).
    """
    n = caps.shape[0]
    for k in range(n):
        lo[k] = 0
        hi[k] = caps[k]
    met = np.zeros(n, dtype=np.bool_)
    hit = False
    t_hit = -1
    for t in range(horizon - 1, -1, -1):
        e = draw(key, t, alias_thr, alias_idx)
        apply_event(mode, lo, hi, e, caps, mu, kind, arg, level, thr)
        if mode == AEPSA:
            if not hit and _equal(lo, hi):
                hit = True
        elif mode == ALG4:
            for k in range(n):
                if lo[k] == hi[k]:
                    met[k] = True
        elif mode == SUP:
            if _is_zero(hi):
                hit = True
                t_hit = t
    if mode == PSA or mode == EPSA:
        return _equal(lo, hi), t_hit
    if mode == ALG4:
        for k in range(n):
            if not met[k]:
                return False, t_hit
        return True, t_hit
    return hit, t_hit


@nb.njit(cache=True)
def cftp(mode, key, max_horizon, exact_stop, lo, hi, caps, mu, kind, arg, level, thr,
         alias_thr, alias_idx):
    """Horizon doubling, then bisection for the exact backward stopping time.

    Returns ``(coalesced, horizon, stop_time, draws, t_hit)``; ``lo``/``hi``
    hold the outcome of the final doubling window.
    """
    n = caps.shape[0]
    T = 1
    draws = 0
    while True:
        ok, t_hit = run_window(mode, key, T, lo, hi, caps, mu, kind, arg, level, thr,
                               alias_thr, alias_idx)
        draws += T
        if ok:
            break
        if 2 * T > max_horizon:
            return False, T, T, draws, t_hit
        T *= 2
    stop = T
    if exact_stop and T > 1:
        a = T // 2
        b = T
        slo = np.empty(n, dtype=np.int64)
        shi = np.empty(n, dtype=np.int64)
        while b - a > 1:
            mid = (a + b) // 2
            ok_mid, _ = run_window(mode, key, mid, slo, shi, caps, mu, kind, arg, level, thr,
                                   alias_thr, alias_idx)
            if ok_mid:
                b = mid
            else:
                a = mid
        stop = b
    return True, T, stop, draws, t_hit


@nb.njit(cache=True)
def cftp_batch(mode, keys, max_horizon, exact_stop, caps, mu, kind, arg, level, thr,
               alias_thr, alias_idx):
    r = keys.shape[0]
    n = caps.shape[0]
    lo = np.zeros((r, n), dtype=np.int64)
    hi = np.zeros((r, n), dtype=np.int64)
    ok = np.zeros(r, dtype=np.bool_)
    horizon = np.zeros(r, dtype=np.int64)
    stop = np.zeros(r, dtype=np.int64)
    draws = np.zeros(r, dtype=np.int64)
    t_hit = np.zeros(r, dtype=np.int64)
    for s in range(r):
        res = cftp(mode, keys[s], max_horizon, exact_stop, lo[s], hi[s], caps, mu, kind, arg,
                   level, thr, alias_thr, alias_idx)
        ok[s] = res[0]
        horizon[s] = res[1]
        stop[s] = res[2]
        draws[s] = res[3]
        t_hit[s] = res[4]
    return lo, hi, ok, horizon, stop, draws, t_hit


@nb.njit(cache=True)
def window_batch(mode, keys, horizon, caps, mu, kind, arg, level, thr, alias_thr, alias_idx):
    """Interval at time 0 after a fixed-length window, for each key."""
    r = keys.shape[0]
    n = caps.shape[0]
    lo = np.zeros((r, n), dtype=np.int64)
    hi = np.zeros((r, n), dtype=np.int64)
    for s in range(r):
        run_window(mode, keys[s], horizon, lo[s], hi[s], caps, mu, kind, arg, level, thr,
                   alias_thr, alias_idx)
    return lo, hi


@nb.njit(cache=True)
def draw_batch(key, start, stop, alias_thr, alias_idx):
    out = np.empty(stop - start, dtype=np.int64)
    for t in range(start, stop):
        out[t - start] = draw(key, t, alias_thr, alias_idx)
    return out
