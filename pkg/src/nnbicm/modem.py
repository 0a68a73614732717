"""Gray-labelled square QAM, bit interleaving and soft demapping.

Bit order within a label is MSB first: label bit m=0 is the first bit of
each M-bit group.  LLRs are log p(bit=1)/p(bit=0) and clamped to +-LLR_MAX.
Bipolar label form is s = 2b - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .ldpc import LLR_MAX
from .mathcore import ConfigurationError, RandomSource

PROB_FLOOR = 1e-30


@dataclass(frozen=True, eq=False)
class Constellation:
    """Square 2^M-QAM with per-axis reflected Gray labels and unit mean energy.

    ``points[i]`` is the point whose integer label is ``i``; ``labels[i]``
    holds its M bits.  ``bit_sets[m][b]`` lists the label indices whose m-th
    bit equals b.
    """

    bits_per_symbol: int
    points: np.ndarray
    labels: np.ndarray
    bit_sets: tuple

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bipolar(self) -> np.ndarray:
        return 2.0 * self.labels - 1.0


def _gray_pam(nbits: int) -> np.ndarray:
    """Levels of a 2^nbits PAM indexed by their Gray label (ascending position -> Gray code)."""
    size = 1 << nbits
    pos = np.arange(size)
    gray = pos ^ (pos >> 1)
    levels = np.empty(size)
    levels[gray] = 2.0 * pos - (size - 1)
    return levels


def build_constellation(bits_per_symbol: int) -> Constellation:
    M = int(bits_per_symbol)
    if M < 2 or M > 8 or M % 2:
        raise ConfigurationError(f"unsupported bits per symbol {bits_per_symbol}; need even 2..8")
    half = M // 2
    pam = _gray_pam(half)
    idx = np.arange(1 << M)
    i_lab = idx >> half
    q_lab = idx & ((1 << half) - 1)
    pts = pam[i_lab] + 1j * pam[q_lab]
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    labels = ((idx[:, None] >> np.arange(M - 1, -1, -1)) & 1).astype(np.int8)
    bit_sets = tuple(
        (np.flatnonzero(labels[:, m] == 0), np.flatnonzero(labels[:, m] == 1)) for m in range(M)
    )
    return Constellation(M, pts, labels, bit_sets)


def bits_to_indices(bits, c: Constellation) -> np.ndarray:
    b = np.asarray(bits)
    M = c.bits_per_symbol
    if b.shape[-1] % M:
        raise ValueError(f"bit count {b.shape[-1]} not divisible by {M}")
    groups = b.reshape(b.shape[:-1] + (-1, M)).astype(np.int64)
    return groups @ (1 << np.arange(M - 1, -1, -1))


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map consecutive M-bit groups (first bit = label MSB) onto symbols."""
    return c.points[bits_to_indices(bits, c)]


def indices_to_bits(indices, c: Constellation) -> np.ndarray:
    lab = c.labels[np.asarray(indices)]
    return lab.reshape(lab.shape[:-2] + (-1,))


def hard_demap(symbols, c: Constellation) -> np.ndarray:
    """Minimum-distance detection; returns label indices."""
    y = np.asarray(symbols)
    return np.argmin(np.abs(y[..., None] - c.points) ** 2, axis=-1)


# --------------------------------------------------------------------------
# interleaving


@dataclass(frozen=True, eq=False)
class Interleaver:
    permutation: np.ndarray
    seed: int | None = None

    @classmethod
    def random(cls, n: int, seed: int) -> "Interleaver":
        perm = RandomSource(seed).stream("interleaver").permutation(n)
        return cls(perm, seed)

    @classmethod
    def identity(cls, n: int) -> "Interleaver":
        return cls(np.arange(n), None)

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(len(self.permutation))
        return inv

    def __len__(self) -> int:
        return len(self.permutation)


def interleave(x, pi: Interleaver) -> np.ndarray:
    """out[i] = x[perm[i]] along the last axis."""
    x = np.asarray(x)
    if x.shape[-1] != len(pi):
        raise ValueError(f"length {x.shape[-1]} != interleaver size {len(pi)}")
    return x[..., pi.permutation]


def deinterleave(x, pi: Interleaver) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != len(pi):
        raise ValueError(f"length {x.shape[-1]} != interleaver size {len(pi)}")
    return x[..., pi.inverse]


# --------------------------------------------------------------------------
# soft demapping


def _bit_llrs_from_logmetric(logp: np.ndarray, c: Constellation) -> np.ndarray:
    """LLRs from per-point log metrics (..., 2^M) -> (..., M)."""
    out = np.empty(logp.shape[:-1] + (c.bits_per_symbol,))
    for m, (s0, s1) in enumerate(c.bit_sets):
        out[..., m] = logsumexp(logp[..., s1], axis=-1) - logsumexp(logp[..., s0], axis=-1)
    return np.clip(out, -LLR_MAX, LLR_MAX)


def gaussian_log_kernels(y, sigma2, alpha: float, c: Constellation) -> np.ndarray:
    """-|Y - alpha S|^2 / sigma2 for every point; shape (..., 2^M)."""
    y = np.asarray(y)
    s2 = np.asarray(sigma2, dtype=float)
    if np.any(s2 <= 0):
        raise ValueError("noise variance must be positive")
    d2 = np.abs(y[..., None] - alpha * c.points) ** 2
    return -d2 / np.expand_dims(s2, -1) if s2.ndim else -d2 / s2


def demap_gaussian(y, sigma2, alpha: float, c: Constellation, distortion_var: float = 0.0) -> np.ndarray:
    """Gaussian MAP bit LLRs.

    The effective variance is ``sigma2 + distortion_var``: pass the clipping
    distortion power to account for it, or 0 to assume noise only.
    """
    return _bit_llrs_from_logmetric(gaussian_log_kernels(y, np.asarray(sigma2) + distortion_var, alpha, c), c)


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0):
        raise ValueError("likelihoods must be nonnegative")
    if np.any(p.sum(axis=-1) <= 0):
        raise ValueError("likelihood vector is all zero")
    return p


def demap_from_probs(probs, c: Constellation) -> np.ndarray:
    """L_m = log sum_{b_m=1} p - log sum_{b_m=0} p from per-point likelihoods."""
    p = _check_probs(probs)
    return _bit_llrs_from_logmetric(np.log(np.maximum(p, PROB_FLOOR)), c)


def demap_extrinsic(probs, bit_priors, c: Constellation) -> np.ndarray:
    """Extrinsic bit LLRs with a priori bit LLRs on the other label bits.

    For bit m the sum over points uses the prior of every bit except m
    itself; the prior factors are 1/2 (1 + tanh(L/2) s).
    """
    p = _check_probs(probs)
    La = np.clip(np.asarray(bit_priors, dtype=float), -LLR_MAX, LLR_MAX)
    logp = np.log(np.maximum(p, PROB_FLOOR))
    # log of 1/2(1 + tanh(L/2) s) = -log(1 + exp(-s L)); shape (..., 2^M, M)
    s = c.bipolar
    logprior_bits = -np.logaddexp(0.0, -s * La[..., None, :])
    total = logprior_bits.sum(axis=-1)
    out = np.empty(logp.shape[:-1] + (c.bits_per_symbol,))
    for m, (s0, s1) in enumerate(c.bit_sets):
        metric = logp + total - logprior_bits[..., m]
        out[..., m] = logsumexp(metric[..., s1], axis=-1) - logsumexp(metric[..., s0], axis=-1)
    return np.clip(out, -LLR_MAX, LLR_MAX)


def prior_pmf_from_llrs(bit_llrs, c) -> np.ndarray:
    """Symbol PMF prod_m 1/2 (1 + tanh(L_m/2) s_m) over all constellation points.

    ``c`` is a Constellation or a bare (2^M, M) label table.
    """
    La = np.clip(np.asarray(bit_llrs, dtype=float), -LLR_MAX, LLR_MAX)
    s = c.bipolar if isinstance(c, Constellation) else 2.0 * np.asarray(c) - 1.0
    factors = 0.5 * (1.0 + np.tanh(0.5 * La[..., None, :]) * s)
    pmf = np.prod(factors, axis=-1)
    return pmf / pmf.sum(axis=-1, keepdims=True)
