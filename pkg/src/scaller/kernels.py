"""Counter-based random number kernels.

Every random quantity in the simulator is a pure function of a 64-bit seed
and an integer key tuple (stream, chip, block, device).  Draws are therefore
order-independent and safe to evaluate concurrently: there is no generator
state to share or advance.  The hash chain is splitmix64-style mixing; the
Gaussian transform is Box-Muller.

Two interchangeable backends are provided:

* ``numba`` -- @njit-compiled loops (default when numba imports cleanly)
* ``numpy`` -- vectorized uint64 arithmetic

The integer hash chain is bit-identical across backends; the final log/cos
transform may differ by one ulp (libm versus numpy's vectorized routines),
so byte-level reproducibility is guaranteed within one backend, not across
backends.

Select explicitly with ``SCALLER_BACKEND=numba`` or ``SCALLER_BACKEND=numpy``.
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_OUT1 = 0x8A5CD789635D2DFF
_OUT2 = 0x2545F4914F6CDD1D
_MASK = 0xFFFFFFFFFFFFFFFF
_INV53 = 2.0 ** -53


def _mix_py(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def hash_words(seed: int, words) -> int:
    """Collapse (seed, words...) into one well-mixed uint64."""
    h = seed & _MASK
    for w in words:
        h = _mix_py((h + _GAMMA) & _MASK ^ (int(w) & _MASK))
    return h


def normal_from_hash(h: int) -> float:
    """One standard normal from a mixed uint64 (Box-Muller, cosine branch)."""
    h1 = _mix_py((h + _OUT1) & _MASK)
    h2 = _mix_py((h + _OUT2) & _MASK)
    u1 = ((h1 >> 11) + 1) * _INV53  # in (0, 1]
    u2 = (h2 >> 11) * _INV53        # in [0, 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _keyed_normals_numpy(seed: int, words: np.ndarray) -> np.ndarray:
    w = np.ascontiguousarray(words, dtype=np.uint64)
    if w.ndim == 1:
        w = w[:, None]
    h = np.full(w.shape[0], seed & _MASK, dtype=np.uint64)
    gamma = np.uint64(_GAMMA)
    m1, m2 = np.uint64(_MIX1), np.uint64(_MIX2)
    for j in range(w.shape[1]):
        z = (h + gamma) ^ w[:, j]
        z = (z ^ (z >> np.uint64(30))) * m1
        z = (z ^ (z >> np.uint64(27))) * m2
        h = z ^ (z >> np.uint64(31))
    out = np.empty((2, h.shape[0]), dtype=np.uint64)
    for i, c in enumerate((_OUT1, _OUT2)):
        z = h + np.uint64(c)
        z = (z ^ (z >> np.uint64(30))) * m1
        z = (z ^ (z >> np.uint64(27))) * m2
        out[i] = z ^ (z >> np.uint64(31))
    u1 = ((out[0] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53
    u2 = (out[1] >> np.uint64(11)).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def _mix(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True)
    def _keyed_normals(seed, words, out):
        n, m = words.shape
        gamma = np.uint64(_GAMMA)
        c1, c2 = np.uint64(_OUT1), np.uint64(_OUT2)
        for i in range(n):
            h = np.uint64(seed)
            for j in range(m):
                h = _mix((h + gamma) ^ words[i, j])
            h1 = _mix(h + c1)
            h2 = _mix(h + c2)
            u1 = (np.float64(h1 >> np.uint64(11)) + 1.0) * _INV53
            u2 = np.float64(h2 >> np.uint64(11)) * _INV53
            out[i] = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def keyed_normals(seed, words):
        w = np.ascontiguousarray(words, dtype=np.uint64)
        if w.ndim == 1:
            w = w[:, None]
        out = np.empty(w.shape[0], dtype=np.float64)
        _keyed_normals(np.uint64(seed & _MASK), w, out)
        return out

    return keyed_normals


def _select_backend():
    choice = os.environ.get("SCALLER_BACKEND", "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"SCALLER_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy", _keyed_normals_numpy
    try:
        return "numba", _build_numba()
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", _keyed_normals_numpy


BACKEND, _keyed_normals_impl = _select_backend()


def keyed_normals(seed: int, words: np.ndarray) -> np.ndarray:
    """Standard normals for an (n, m) uint64 key array, one draw per row.

    Identical key rows give identical values; the result does not depend on
    evaluation order or batch boundaries.
    """
    return _keyed_normals_impl(seed, words)


def keyed_normal(seed: int, *words: int) -> float:
    """Scalar counterpart of :func:`keyed_normals`."""
    return normal_from_hash(hash_words(seed, words))


def backend_name() -> str:
    return BACKEND
