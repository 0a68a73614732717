"""Shared numerical kernels: Gaussian tail/density, unitary radix-2 DFT, seeded streams."""

from __future__ import annotations

import math
import zlib

import numpy as np
from scipy import special

SQRT_2PI = math.sqrt(2.0 * math.pi)


class ConfigurationError(ValueError):
    """Raised for invalid run parameters (sizes, orders, levels)."""


def q_function(x):
    """Gaussian tail probability Q(x) = P(Z > x) for a standard normal Z."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def gauss_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_radix2(x: np.ndarray, sign: float) -> np.ndarray:
    """Unscaled iterative decimation-in-time FFT along the last axis."""
    n = x.shape[-1]
    out = x[..., _bit_reverse_indices(n)].astype(complex)
    batch = out.shape[:-1]
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * math.pi * np.arange(half) / m)
        blocks = out.reshape(batch + (n // m, m))
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(batch + (n,))
        m *= 2
    return out


def dft(values, direction: str = "forward") -> np.ndarray:
    """Unitary DFT along the last axis (1/sqrt(N) in both directions).

    ``direction="inverse"`` computes s_n = N^-1/2 sum_k S_k exp(+j 2 pi n k / N);
    ``"forward"`` uses the negative exponent, so the pair are exact inverses.
    Any leading axes are treated as a batch.
    """
    x = np.asarray(values)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ConfigurationError(f"DFT length must be a power of two, got {n}")
    if direction == "forward":
        sign = -1.0
    elif direction == "inverse":
        sign = 1.0
    else:
        raise ConfigurationError(f"unknown DFT direction {direction!r}")
    return _fft_radix2(x, sign) / math.sqrt(n)


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RandomSource:
    """Deterministic random stream derived from a master seed.

    Named sub-streams (``stream("noise")``) and indexed children
    (``child(17)``) are independent of each other and of the order in which
    they are requested, so per-frame randomness does not depend on batching.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(_key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def stream(self, name: str) -> "RandomSource":
        return RandomSource(self.seed, self.key + (_name_key(name),))

    def child(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, self.key + (int(index),))

    def bits(self, n: int) -> np.ndarray:
        return self.generator.integers(0, 2, size=n, dtype=np.int8)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self.generator.uniform(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, key={self.key})"
