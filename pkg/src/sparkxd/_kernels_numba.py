"""Numba-compiled kernel implementations.

Loop-style twins of ``_kernels_numpy``; same per-timestep operation order.
"""

import numpy as np
from numba import njit

_HIT, _MISS, _CONFLICT = 0, 1, 2


@njit(cache=True)
def classify_stream(bank, row, n_banks):
    n = len(bank)
    cond = np.empty(n, dtype=np.int8)
    open_row = np.full(n_banks, -1, dtype=np.int64)
    for i in range(n):
        b = bank[i]
        r = row[i]
        if open_row[b] < 0:
            cond[i] = _MISS
        elif open_row[b] == r:
            cond[i] = _HIT
        else:
            cond[i] = _CONFLICT
        open_row[b] = r
    return cond


@njit(cache=True)
def burst_schedule(bank, cond, rp_c, rcd_c, ras_c, col_c, n_burst_banks, n_banks):
    bank_free = np.zeros(n_banks, dtype=np.int64)
    act_time = np.full(n_banks, -(10**12), dtype=np.int64)
    recent = np.zeros(n_burst_banks, dtype=np.int64)
    bus_free = np.int64(0)
    finish = np.int64(0)
    for i in range(len(bank)):
        b = bank[i]
        gate = recent[i % n_burst_banks] if i >= n_burst_banks else np.int64(0)
        c = cond[i]
        if c == _CONFLICT:
            pre_at = max(bank_free[b], act_time[b] + ras_c, gate)
            act_at = pre_at + rp_c
            ready = act_at + rcd_c
            act_time[b] = act_at
        elif c == _MISS:
            act_at = max(bank_free[b], gate)
            ready = act_at + rcd_c
            act_time[b] = act_at
        else:
            ready = bank_free[b]
        start = max(ready, bus_free)
        finish = start + col_c
        bus_free = finish
        bank_free[b] = finish
        recent[i % n_burst_banks] = finish
    return finish


@njit(cache=True)
def lif_run(
    spikes,
    w,
    theta,
    v_th,
    v_rest,
    v_reset,
    dt,
    d_mem,
    d_syn,
    d_theta,
    theta_plus,
    refrac_steps,
    inhib,
    learn,
    eta_pre,
    eta_post,
    x_tar,
    d_pre,
    d_post,
    w_max,
):
    T, n_in = spikes.shape
    n_exc = w.shape[1]
    v = np.full(n_exc, v_rest, dtype=np.float64)
    g = np.zeros(n_exc, dtype=np.float64)
    refrac = np.zeros(n_exc, dtype=np.int64)
    x_pre = np.zeros(n_in, dtype=np.float64)
    x_post = np.zeros(n_exc, dtype=np.float64)
    counts = np.zeros(n_exc, dtype=np.int64)
    fired = np.zeros(n_exc, dtype=np.bool_)
    for t in range(T):
        for j in range(n_exc):
            g[j] *= d_syn
        if learn:
            for i in range(n_in):
                x_pre[i] *= d_pre
            for j in range(n_exc):
                x_post[j] *= d_post
                theta[j] *= d_theta
        for i in range(n_in):
            if spikes[t, i]:
                for j in range(n_exc):
                    g[j] += w[i, j]
                if learn:
                    for j in range(n_exc):
                        nw = w[i, j] - eta_pre * x_post[j]
                        if nw < 0.0:
                            nw = 0.0
                        elif nw > w_max:
                            nw = w_max
                        w[i, j] = nw
                    x_pre[i] += 1.0
        n_fired = 0
        for j in range(n_exc):
            if refrac[j] > 0:
                refrac[j] -= 1
                v[j] = v_reset
                fired[j] = False
            else:
                v[j] = v_rest + (v[j] - v_rest) * d_mem + g[j] * dt
                fired[j] = v[j] >= v_th + theta[j]
        for j in range(n_exc):
            if fired[j]:
                n_fired += 1
                counts[j] += 1
                v[j] = v_reset
                refrac[j] = refrac_steps
                if learn:
                    theta[j] += theta_plus
                    for i in range(n_in):
                        nw = w[i, j] + eta_post * (x_pre[i] - x_tar)
                        if nw < 0.0:
                            nw = 0.0
                        elif nw > w_max:
                            nw = w_max
                        w[i, j] = nw
                    x_post[j] += 1.0
        if n_fired > 0 and inhib > 0.0:
            for j in range(n_exc):
                if not fired[j]:
                    v[j] -= inhib * n_fired
    return counts
