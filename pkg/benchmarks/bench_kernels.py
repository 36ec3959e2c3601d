#!/usr/bin/env python3
"""Benchmark the compiled pair-counting kernels against the pure-Python
fallback (and a brute-force reference for context).

Run from the repository root after building the extension in place:

    python setup.py build_ext --inplace
    python benchmarks/bench_kernels.py
"""

import random
import time

from socmob import _kernels_py

try:
    from socmob import _ckernels
except ImportError:
    _ckernels = None


def brute_count(a, b, window):
    return sum(1 for x in a for y in b if abs(x - y) <= window)


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    rng = random.Random(7)
    print(f"{'n':>8} {'python':>12} {'cython':>12} {'speedup':>9} {'brute':>12}")
    for n in (100, 1_000, 10_000, 100_000):
        a = sorted(rng.randrange(0, n * 50) for _ in range(n))
        b = sorted(rng.randrange(0, n * 50) for _ in range(n))
        window = n * 2

        t_py, r_py = timeit(_kernels_py.count_pairs_within, a, b, window)
        row = f"{n:>8} {t_py * 1e3:>10.2f}ms"

        if _ckernels is not None:
            t_cy, r_cy = timeit(_ckernels.count_pairs_within, a, b, window)
            assert r_cy == r_py
            row += f" {t_cy * 1e3:>10.2f}ms {t_py / t_cy:>8.1f}x"
        else:
            row += f" {'n/a':>12} {'':>9}"

        if n <= 1_000:
            t_br, r_br = timeit(brute_count, a, b, window, repeat=1)
            assert r_br == r_py
            row += f" {t_br * 1e3:>10.2f}ms"
        else:
            row += f" {'-':>12}"
        print(row)

    print()
    print("weighted variant:")
    for n in (1_000, 10_000, 100_000):
        a = sorted(rng.randrange(0, n * 50) for _ in range(n))
        b = sorted(rng.randrange(0, n * 50) for _ in range(n))
        wa = [rng.random() for _ in range(n)]
        wb = [rng.random() for _ in range(n)]
        window = n * 2
        t_py, r_py = timeit(_kernels_py.count_pairs_within_weighted, a, b, window, wa, wb)
        row = f"{n:>8} {t_py * 1e3:>10.2f}ms"
        if _ckernels is not None:
            t_cy, r_cy = timeit(_ckernels.count_pairs_within_weighted, a, b, window, wa, wb)
            assert abs(r_cy - r_py) < 1e-6 * max(abs(r_py), 1.0)
            row += f" {t_cy * 1e3:>10.2f}ms {t_py / t_cy:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
