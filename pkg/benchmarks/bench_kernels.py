"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
The same kernels are selected at import time by SPARKXD_NUMBA; here both
backends are loaded explicitly and timed on desk-scale workloads.
"""

import time

import numpy as np

from sparkxd import accel
from sparkxd.snn import SnnParams


def timeit(fn, *args, repeat=5):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def lif_workload(seed=0, n_in=784, n_exc=100, steps=350):
    rng = np.random.default_rng(seed)
    spikes = (rng.random((steps, n_in)) < 0.01).astype(np.uint8)
    w = (rng.random((n_in, n_exc)) * 0.5).astype(np.float32)
    theta = np.zeros(n_exc)
    p = SnnParams(n_in=n_in, n_exc=n_exc)
    d_mem, d_syn, d_theta, d_pre, d_post = p.decays()
    return (
        spikes, w, theta,
        p.v_th_mv, p.v_rest_mv, p.v_reset_mv, p.dt_ms,
        d_mem, d_syn, d_theta, p.theta_plus_mv, p.refrac_steps, p.inhib_mv,
        True, p.eta_pre, p.eta_post, p.x_tar, d_pre, d_post, p.w_max,
    )


def stream_workload(seed=0, n=78400, n_banks=8, n_rows=256):
    rng = np.random.default_rng(seed)
    bank = rng.integers(0, n_banks, n).astype(np.int64)
    row = rng.integers(0, n_rows, n).astype(np.int64)
    return bank, row, n_banks


def main():
    np_impl = accel.get_backend("numpy")
    try:
        nb_impl = accel.get_backend("numba")
    except RuntimeError:
        print("numba unavailable; nothing to compare")
        return

    rows = []

    # LIF training sample (784 inputs x 100 neurons x 350 steps, STDP on)
    nb_impl.lif_run(*lif_workload())  # compile
    t_nb, _ = timeit(lambda: nb_impl.lif_run(*lif_workload()))
    t_np, _ = timeit(lambda: np_impl.lif_run(*lif_workload()))
    rows.append(("lif_run (train sample)", t_np, t_nb))

    # row-buffer classification over one inference pass
    bank, row, n_banks = stream_workload()
    nb_impl.classify_stream(bank, row, n_banks)
    t_nb, cond = timeit(nb_impl.classify_stream, bank, row, n_banks)
    t_np, cond_np = timeit(np_impl.classify_stream, bank, row, n_banks)
    assert np.array_equal(cond, cond_np)
    rows.append(("classify_stream (78k)", t_np, t_nb))

    # burst scheduling over the classified stream
    args = (bank, cond.astype(np.int64), 15, 15, 34, 8, 4, n_banks)
    nb_impl.burst_schedule(*args)
    t_nb, c_nb = timeit(nb_impl.burst_schedule, *args)
    t_np, c_np = timeit(np_impl.burst_schedule, *args)
    assert c_nb == c_np
    rows.append(("burst_schedule (78k)", t_np, t_nb))

    print(f"{'kernel':<26}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, t_np, t_nb in rows:
        print(f"{name:<26}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms"
              f"{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
