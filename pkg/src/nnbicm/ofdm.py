"""DCO-OFDM transmitter front end: Hermitian framing, DC bias, double-sided clipping.

Closed-form clipping analytics assume Gaussian time-domain samples, which
holds well for N >= 64 subcarriers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mathcore import ConfigurationError, dft, gauss_pdf, is_power_of_two, q_function

IMAG_TOL = 1e-10


def data_indices(N: int) -> np.ndarray:
    return np.arange(1, N // 2)


def frame_subcarriers(symbols, N: int) -> np.ndarray:
    """Place N/2 - 1 symbols on subcarriers 1..N/2-1 with Hermitian symmetry.

    Bins 0 and N/2 are zero.  Leading axes of ``symbols`` are kept as batch axes.
    """
    if not is_power_of_two(N) or N < 4:
        raise ConfigurationError(f"FFT size must be a power of two >= 4, got {N}")
    s = np.asarray(symbols, dtype=complex)
    if s.shape[-1] != N // 2 - 1:
        raise ValueError(f"need {N // 2 - 1} symbols for N={N}, got {s.shape[-1]}")
    frame = np.zeros(s.shape[:-1] + (N,), dtype=complex)
    frame[..., 1:N // 2] = s
    frame[..., N // 2 + 1:] = np.conj(s[..., ::-1])
    return frame


def to_time(frame) -> np.ndarray:
    """Inverse unitary DFT of a Hermitian frame; returns the real samples."""
    t = dft(frame, "inverse")
    resid = np.max(np.abs(t.imag)) if t.size else 0.0
    if resid > IMAG_TOL:
        raise AssertionError(f"time signal not real: max |imag| = {resid:.3e}")
    return t.real.copy()


def signal_std(N: int) -> float:
    """Time-domain std for unit-energy symbols on N/2-1 Hermitian pairs (unitary IFFT)."""
    return float(np.sqrt((N - 2) / N))


def omega_top_from_clipping_level(psi_db: float, sigma_s: float) -> float:
    if sigma_s <= 0:
        raise ConfigurationError("sigma_s must be positive")
    return float(sigma_s * 10.0 ** (psi_db / 20.0))


def dc_bias_midpoint(omega_b: float, omega_t: float) -> float:
    if not omega_b < omega_t:
        raise ConfigurationError(f"clip levels inverted: omega_b={omega_b} >= omega_t={omega_t}")
    return 0.5 * (omega_b + omega_t)


def _xg(x):
    # x * g(x), with the x -> +-inf limit 0
    x = np.asarray(x, dtype=float)
    xf = np.where(np.isfinite(x), x, 0.0)
    return np.where(np.isfinite(x), xf * gauss_pdf(xf), 0.0)


def _xq(x, arg, power):
    # x^power * Q(arg) where x = +-inf implies Q(arg) -> 0 fast enough
    x = np.asarray(x, dtype=float)
    xf = np.where(np.isfinite(x), x, 0.0)
    return np.where(np.isfinite(x), xf ** power * q_function(arg), 0.0)


@dataclass(frozen=True)
class ClippingParams:
    """Clip levels and bias of a DCO-OFDM signal with time-domain std ``sigma_s``.

    Normalized quantities: phi_* = level / sigma_s, delta_* = phi_* - phi.
    """

    sigma_s: float
    omega_b: float
    omega_t: float
    mu: float

    def __post_init__(self):
        if not self.omega_b < self.omega_t:
            raise ConfigurationError("omega_b must be below omega_t")
        if self.sigma_s <= 0:
            raise ConfigurationError("sigma_s must be positive")

    @classmethod
    def from_clipping_level(cls, psi_db: float, N: int, omega_b: float = 0.0) -> "ClippingParams":
        sigma_s = signal_std(N)
        omega_t = omega_top_from_clipping_level(psi_db, sigma_s)
        return cls(sigma_s, omega_b, omega_t, dc_bias_midpoint(omega_b, omega_t))

    @classmethod
    def from_deltas(cls, delta_b: float, delta_t: float, sigma_s: float = 1.0) -> "ClippingParams":
        return cls(sigma_s, delta_b * sigma_s, delta_t * sigma_s, 0.0)

    @property
    def phi(self) -> float:
        return self.mu / self.sigma_s

    @property
    def phi_b(self) -> float:
        return self.omega_b / self.sigma_s

    @property
    def phi_t(self) -> float:
        return self.omega_t / self.sigma_s

    @property
    def delta_b(self) -> float:
        return self.phi_b - self.phi

    @property
    def delta_t(self) -> float:
        return self.phi_t - self.phi

    @cached_property
    def alpha(self) -> float:
        return bussgang_alpha(self)

    @cached_property
    def p_e(self) -> float:
        return electrical_power(self)

    @cached_property
    def sigma_d2(self) -> float:
        return distortion_power(self)


def bias_and_clip(s, p: ClippingParams) -> np.ndarray:
    """Add the DC bias and clip to [omega_b, omega_t]."""
    return np.clip(np.asarray(s, dtype=float) + p.mu, p.omega_b, p.omega_t)


def bussgang_alpha(p: ClippingParams) -> float:
    return float(q_function(p.delta_b) - q_function(p.delta_t))


def electrical_power(p: ClippingParams) -> float:
    """Second moment of the clipped signal about the bias (DC excluded)."""
    db, dt = p.delta_b, p.delta_t
    val = (q_function(db) - q_function(dt) + _xg(db) - _xg(dt)
           + _xq(db, -db, 2) + _xq(dt, dt, 2))
    return float(p.sigma_s ** 2 * val)


def clipped_mean_offset(p: ClippingParams) -> float:
    """E[clipped] - mu for a zero-mean Gaussian input."""
    db, dt = p.delta_b, p.delta_t
    val = gauss_pdf(db) - gauss_pdf(dt) + _xq(db, -db, 1) + _xq(dt, dt, 1)
    return float(p.sigma_s * val)


def distortion_power(p: ClippingParams) -> float:
    """Per-sample power of the Bussgang distortion term d = clipped - alpha s."""
    var = electrical_power(p) - clipped_mean_offset(p) ** 2
    return float(max(var - p.alpha ** 2 * p.sigma_s ** 2, 0.0))
