"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from noisy_meta import kernels
from noisy_meta.noise_analysis import ConfusionMatrixQ, simulate_draws


def _time(fn, repeat):
    fn()  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    q8 = ConfusionMatrixQ(8, 0.4).matrix()
    q10 = ConfusionMatrixQ(10, 0.4).matrix()
    draws = simulate_draws(5, 0.6, 1_000_000, rng)
    z_small = rng.standard_normal((5, 10, 32))
    z_big = rng.standard_normal((15, 10, 32))

    cases = [
        ("permanent brute force, N=8", lambda: kernels._permanent_bruteforce_numba(q8),
         lambda: kernels._permanent_bruteforce_numpy(q8)),
        ("permanent Ryser, N=10", lambda: kernels._permanent_ryser_numba(q10),
         lambda: kernels._permanent_ryser_numpy(q10)),
        ("distinct rows, 1e6 x 5", lambda: kernels._count_distinct_rows_numba(draws),
         lambda: kernels._count_distinct_rows_numpy(draws)),
        ("DCL, 5 manifolds x 10 x 32", lambda: kernels._dcl_batch_numba(z_small, 0.1, True),
         lambda: kernels._dcl_batch_numpy(z_small, 0.1, True)),
        ("DCL, 15 manifolds x 10 x 32", lambda: kernels._dcl_batch_numba(z_big, 0.1, True),
         lambda: kernels._dcl_batch_numpy(z_big, 0.1, True)),
    ]
    print(f"{'kernel':34s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name, fast, slow in cases:
        a = _time(fast, args.repeat) * 1e3
        b = _time(slow, args.repeat) * 1e3
        print(f"{name:34s} {a:12.3f} {b:12.3f} {b / a:9.1f}x")


if __name__ == "__main__":
    main()
