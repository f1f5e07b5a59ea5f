"""Pure-numpy kernel implementations.

Fallback backend used when numba is unavailable or disabled via
``SPARKXD_NUMBA=0``.  Semantics (including operation order within a
timestep) must match ``_kernels_numba`` exactly; the equivalence suite
runs both backends against each other.
"""

import numpy as np

_HIT, _MISS, _CONFLICT = 0, 1, 2


def classify_stream(bank: np.ndarray, row: np.ndarray, n_banks: int) -> np.ndarray:
    """Hit/miss/conflict per access for a sequential stream (open-page)."""
    n = len(bank)
    cond = np.full(n, _MISS, dtype=np.int8)
    if n == 0:
        return cond
    order = np.argsort(bank, kind="stable")  # per-bank streams, original order kept
    b_sorted = bank[order]
    r_sorted = row[order]
    same_bank = np.empty(n, dtype=bool)
    same_bank[0] = False
    same_bank[1:] = b_sorted[1:] == b_sorted[:-1]
    same_row = np.empty(n, dtype=bool)
    same_row[0] = False
    same_row[1:] = r_sorted[1:] == r_sorted[:-1]
    c_sorted = np.where(same_bank, np.where(same_row, _HIT, _CONFLICT), _MISS)
    cond[order] = c_sorted.astype(np.int8)
    return cond


def burst_schedule(
    bank: np.ndarray,
    cond: np.ndarray,
    rp_c: int,
    rcd_c: int,
    ras_c: int,
    col_c: int,
    n_burst_banks: int,
    n_banks: int,
) -> int:
    """Pipelined cycle count for a classified access stream.

    Row preparation overlaps across banks while the data bus serializes one
    column transfer per access; at most ``n_burst_banks`` preparations run
    concurrently and PRE respects t_RAS since the bank's last ACT.
    """
    bank_free = np.zeros(n_banks, dtype=np.int64)
    act_time = np.full(n_banks, -(10**12), dtype=np.int64)
    recent = np.zeros(n_burst_banks, dtype=np.int64)  # data finishes, ring buffer
    bus_free = 0
    finish = 0
    for i in range(len(bank)):
        b = int(bank[i])
        gate = recent[i % n_burst_banks] if i >= n_burst_banks else 0
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
    return int(finish)


def _clip(arr, w_max):
    return np.minimum(np.maximum(arr, 0.0), w_max)


def lif_substep(
    v,
    g,
    refrac,
    theta,
    x_pre,
    x_post,
    w,
    spike_row,
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
    """Advance the network one timestep in place; returns the fired mask.

    Order per step: decay conductance/traces/theta, deliver input spikes
    (conductance add, then pre-synaptic depression, then pre-trace bump),
    integrate membranes (refractory neurons held at reset), fire, apply
    post-synaptic potentiation and threshold adaptation, lateral inhibition.
    """
    g *= d_syn
    if learn:
        x_pre *= d_pre
        x_post *= d_post
        theta *= d_theta
    active = np.nonzero(spike_row)[0]
    if active.size:
        # sequential accumulation keeps bit parity with the numba backend
        for i in active:
            g += w[i]
        if learn:
            w[active, :] = _clip(w[active, :] - eta_pre * x_post[None, :], w_max)
            x_pre[active] += 1.0
    in_refrac = refrac > 0
    refrac[in_refrac] -= 1
    v[:] = np.where(in_refrac, v_reset, v_rest + (v - v_rest) * d_mem + g * dt)
    fired = (~in_refrac) & (v >= v_th + theta)
    n_fired = int(np.count_nonzero(fired))
    if n_fired:
        v[fired] = v_reset
        refrac[fired] = refrac_steps
        if learn:
            theta[fired] += theta_plus
            idx = np.nonzero(fired)[0]
            w[:, idx] = _clip(w[:, idx] + eta_post * (x_pre[:, None] - x_tar), w_max)
            x_post[idx] += 1.0
        if inhib > 0.0:
            v[~fired] -= inhib * n_fired
    return fired


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
    """Simulate one sample; returns per-neuron spike counts.

    ``w`` and ``theta`` are updated in place when ``learn`` is set.
    """
    T, n_in = spikes.shape
    n_exc = w.shape[1]
    v = np.full(n_exc, v_rest, dtype=np.float64)
    g = np.zeros(n_exc, dtype=np.float64)
    refrac = np.zeros(n_exc, dtype=np.int64)
    x_pre = np.zeros(n_in, dtype=np.float64)
    x_post = np.zeros(n_exc, dtype=np.float64)
    counts = np.zeros(n_exc, dtype=np.int64)
    for t in range(T):
        fired = lif_substep(
            v, g, refrac, theta, x_pre, x_post, w, spikes[t],
            v_th, v_rest, v_reset, dt, d_mem, d_syn, d_theta, theta_plus,
            refrac_steps, inhib, learn, eta_pre, eta_post, x_tar,
            d_pre, d_post, w_max,
        )
        counts += fired
    return counts
