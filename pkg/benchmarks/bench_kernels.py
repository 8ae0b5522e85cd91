"""Compare the numba and numpy kernel backends.

Run directly::

    python3 benchmarks/bench_kernels.py [n_draws]

Times ``keyed_normals`` on a population-sized key batch with both backends
and reports the speedup, after verifying they produce identical bits.
"""

from __future__ import annotations

import sys
import time

import numpy as np

from scaller.kernels import _build_numba, _keyed_normals_numpy


def make_keys(n: int) -> np.ndarray:
    rng = np.random.default_rng(0)
    return rng.integers(0, 2 ** 63, size=(n, 4), dtype=np.uint64)


def bench(fn, keys, repeats=5):
    fn(1234, keys[:128])  # warm up (JIT compile for numba)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(1234, keys)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
    keys = make_keys(n)
    try:
        numba_fn = _build_numba()
    except ImportError:
        print("numba not available; nothing to compare")
        return
    a = numba_fn(1234, keys[:10000])
    b = _keyed_normals_numpy(1234, keys[:10000])
    worst = float(np.max(np.abs(a - b)))
    if worst > 1e-12:
        print(f"WARNING: backends differ, max abs diff {worst:.3e}")
    else:
        # one-ulp differences in the log/cos step are expected
        print(f"backends agree (max abs diff {worst:.1e})")
    t_numba = bench(numba_fn, keys)
    t_numpy = bench(_keyed_normals_numpy, keys)
    rate = n / t_numba / 1e6
    print(f"{n} draws:")
    print(f"  numba  {t_numba * 1e3:8.1f} ms  ({rate:.1f} M draws/s)")
    print(f"  numpy  {t_numpy * 1e3:8.1f} ms")
    print(f"  speedup numba/numpy: {t_numpy / t_numba:.2f}x")


if __name__ == "__main__":
    main()
