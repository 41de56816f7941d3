"""Shared numeric plumbing: error types, a portable seeded generator and a
few dense-matrix kernels.

Randomness
----------
Every stochastic choice in the package draws from SplitMix64, a 64-bit
counter-based generator whose recurrence is short enough to restate here::

    state_k = seed + k * 0x9E3779B97F4A7C15          (mod 2**64)
    z = state_k
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9        (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB        (mod 2**64)
    out_k = z ^ (z >> 31)                            k = 1, 2, 3, ...

Uniform doubles are ``(out_k >> 11) * 2**-53`` and normals come from the
Box-Muller transform over consecutive uniform pairs. Because each output is
a pure function of ``(seed, k)`` the stream can be produced in vectorized
blocks and reproduced in any language with unsigned 64-bit arithmetic.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "CapacityError",
    "DimensionError",
    "EmptyDatasetError",
    "HebGhaError",
    "InvalidTaskError",
    "NumericFailure",
    "RangeError",
    "RateError",
    "ShapeError",
    "SplitMix64",
    "UndefinedMetricError",
    "derive_seed",
    "dot",
    "frobenius_delta",
    "seeded_uniform_matrix",
    "sumsq",
]

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class HebGhaError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(HebGhaError, ValueError):
    """A size argument is zero or violates a dimension contract."""


class RangeError(HebGhaError, ValueError):
    """An interval is empty or reversed."""


class ShapeError(HebGhaError, ValueError):
    """Operands have incompatible shapes."""


class RateError(HebGhaError, ValueError):
    """A learning rate is not strictly positive."""


class EmptyDatasetError(HebGhaError, ValueError):
    pass


class NumericFailure(HebGhaError, ArithmeticError):
    pass


class UndefinedMetricError(HebGhaError, ValueError):
    """The metric has no meaningful value for the given inputs."""


class InvalidTaskError(HebGhaError, ValueError):
    pass


class CapacityError(HebGhaError, ValueError):
    """More logical units requested than the fabric can host."""


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based SplitMix64 stream.

    >>> SplitMix64(0).next_u64()
    16294208416658607535
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def u64(self, size: int) -> np.ndarray:
        """Next ``size`` raw outputs as a uint64 array."""
        k = np.arange(self.counter + 1, self.counter + size + 1, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + k * np.uint64(_GAMMA)
            return _mix(state)

    def next_u64(self) -> int:
        return int(self.u64(1)[0])

    def uniform(self, size: int) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits each."""
        return (self.u64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        """Standard normals by Box-Muller; consumes ``2 * ceil(size / 2)`` outputs."""
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        rad = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = rad * np.cos(2.0 * np.pi * u2)
        out[1::2] = rad * np.sin(2.0 * np.pi * u2)
        return out[:size]

    def below(self, bound: int) -> int:
        """Unbiased integer in ``[0, bound)`` by rejection."""
        if bound <= 0:
            raise RangeError(f"bound must be positive, got {bound}")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % bound

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``0..n-1`` (Durstenfeld, high index first)."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return np.asarray(idx, dtype=np.int64)


def derive_seed(seed: int, stream: int) -> int:
    """Independent child seed for a numbered sub-stream of ``seed``."""
    z = np.array([(int(seed) ^ (int(stream) * _MIX2)) & MASK64], dtype=np.uint64)
    with np.errstate(over="ignore"):
        return int(_mix(z + np.uint64(_GAMMA))[0])


def seeded_uniform_matrix(rows: int, cols: int, lo: float, hi: float, seed: int) -> np.ndarray:
    """``rows x cols`` matrix of uniform draws in ``[lo, hi)``, row-major from the stream."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    if not lo < hi:
        raise RangeError(f"need lo < hi, got [{lo}, {hi})")
    u = SplitMix64(seed).uniform(rows * cols)
    out = lo + (hi - lo) * u
    # rounding in lo + width*u can land exactly on hi
    out = np.where(out >= hi, np.nextafter(hi, lo), out)
    return out.reshape(rows, cols)


def frobenius_delta(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return math.sqrt(sumsq(a - b))


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Correctly rounded inner product of the elementwise products.

    ``math.fsum`` makes the reduction order-free, so every code path that
    calls this gets bit-identical results on any IEEE-754 platform.
    """
    return math.fsum((a * b).ravel().tolist())


def sumsq(a: np.ndarray) -> float:
    return dot(a, a)
