#!/usr/bin/env python3
"""Timing comparison of the numba kernels against their numpy fallbacks.

Run with the package installed:

    python benchmarks/bench_kernels.py

Setting SCONES_NUMBA=0 changes which path the library itself dispatches to,
but this script always times both implementations directly.
"""

import time

import numpy as np

from scones import _kernels as K
from scones._backend import NUMBA_ENABLED


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm up (and JIT-compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, t_np, t_nb):
    speedup = t_np / t_nb if t_nb else float("nan")
    print(f"{name:<38} numpy {t_np * 1e3:9.3f} ms   numba {t_nb * 1e3:9.3f} ms"
          f"   speedup {speedup:5.2f}x")


def main():
    if not NUMBA_ENABLED:
        print("numba unavailable or disabled; showing numpy timings only")
    rng = np.random.default_rng(0)

    for n, d in [(512, 2), (1024, 16), (4096, 16)]:
        x = np.ascontiguousarray(rng.standard_normal((n, d)))
        y = np.ascontiguousarray(rng.standard_normal((n, d)))
        t_np = timeit(K.pairwise_sqdist_np, x, y)
        t_nb = timeit(K.pairwise_sqdist_nb, x, y) if NUMBA_ENABLED else float("nan")
        row(f"pairwise_sqdist n={n} d={d}", t_np, t_nb)

    for n, kind, alpha, label in [(512, K.KIND_KL, 0.0, "kl"),
                                  (1024, K.KIND_KL, 0.0, "kl"),
                                  (1024, K.KIND_CHI2_HARD, 0.0, "chi2-hard"),
                                  (1024, K.KIND_CHI2_SOFTPLUS, 1000.0, "chi2-softplus")]:
        phi = rng.standard_normal(n)
        psi = rng.standard_normal(n)
        cost = K.pairwise_sqdist_np(rng.standard_normal((n, 4)),
                                    rng.standard_normal((n, 4)))
        w = np.full(n, 1.0 / n)
        t_np = timeit(K.penalty_stats_np, phi, psi, cost, 1.0, kind, alpha, w, w)
        t_nb = (timeit(K.penalty_stats_nb, phi, psi, cost, 1.0, kind, alpha, w, w)
                if NUMBA_ENABLED else float("nan"))
        row(f"penalty_stats m={n} {label}", t_np, t_nb)

    for n in (100, 400):
        cost = K.pairwise_sqdist_np(np.linspace(-3, 3, n)[:, None],
                                    np.linspace(-3, 3, n)[:, None])
        lw = np.log(np.full(n, 1.0 / n))
        t_np = timeit(K.sinkhorn_kl_log_np, cost, lw, lw, 1.0, 1e-9, 10_000, repeat=3)
        t_nb = (timeit(K.sinkhorn_kl_log_nb, np.ascontiguousarray(cost), lw, lw,
                       1.0, 1e-9, 10_000, repeat=3) if NUMBA_ENABLED else float("nan"))
        row(f"sinkhorn_kl_log n={n}", t_np, t_nb)


if __name__ == "__main__":
    main()
