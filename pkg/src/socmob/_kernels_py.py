"""Pure-Python pair-counting kernels.

Reference implementation of the hot loops; `socmob.kernels` prefers the
compiled twin (`socmob._ckernels`) when it has been built.  Both modules
expose the same functions with identical semantics, and the benchmark in
``benchmarks/bench_kernels.py`` compares them.

All functions take timestamp sequences sorted ascending.
"""

BACKEND = "python"


def count_pairs_within(a, b, window):
    """Count pairs (x, y), x from `a`, y from `b`, with |x - y| <= window.

    Two-pointer sweep, O(len(a) + len(b)).  Inputs must be sorted.
    """
    n = len(b)
    lo = 0
    hi = 0
    total = 0
    for x in a:
        lll = x - window
        uuu = x + window
        while lo < n and b[lo] < lll:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and b[hi] <= uuu:
            hi += 1
        total += hi - lo
    return total


def count_pairs_within_weighted(a, b, window, wa, wb):
    """Sum of wa[i] * wb[j] over pairs with |a[i] - b[j]| <= window.

    `wa`/`wb` are per-event weights aligned with `a`/`b`.  A prefix-sum
    over `wb` keeps the sweep linear.
    """
    n = len(b)
    prefix = [0.0] * (n + 1)
    acc = 0.0
    for j in range(n):
        acc += wb[j]
        prefix[j + 1] = acc
    lo = 0
    hi = 0
    total = 0.0
    for i in range(len(a)):
        x = a[i]
        lll = x - window
        uuu = x + window
        while lo < n and b[lo] < lll:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and b[hi] <= uuu:
            hi += 1
        total += wa[i] * (prefix[hi] - prefix[lo])
    return total
