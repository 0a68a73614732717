"""AWGN channel calibrated to electrical Eb/N0, and the receiver-side FFT."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathcore import ConfigurationError, RandomSource, dft
from .ofdm import data_indices


def bandwidth_utilization(N: int) -> float:
    return 0.5 - 1.0 / N


def noise_variance(gamma_e_db: float, p_e: float, epsilon: float, M: int, R: float) -> float:
    """Per-complex-subcarrier noise variance for electrical Eb/N0 ``gamma_e_db``.

    Inverts gamma_e = 10 log10(P_e / (2 eps M R sigma_n^2)).
    """
    if p_e <= 0 or epsilon <= 0 or M <= 0 or R <= 0:
        raise ConfigurationError("noise calibration inputs must be positive")
    return float(p_e / (2.0 * epsilon * M * R * 10.0 ** (gamma_e_db / 10.0)))


@dataclass(frozen=True)
class NoiseCalibration:
    gamma_e_db: float
    epsilon: float
    M: int
    R: float
    p_e: float

    @property
    def sigma_n2(self) -> float:
        return noise_variance(self.gamma_e_db, self.p_e, self.epsilon, self.M, self.R)


def transmit(clipped, sigma_n2: float, rng: RandomSource) -> np.ndarray:
    """Add real white Gaussian noise of variance ``sigma_n2`` per time sample.

    Under the unitary FFT this gives complex noise of variance ``sigma_n2``
    on every data subcarrier.
    """
    x = np.asarray(clipped, dtype=float)
    if sigma_n2 < 0:
        raise ConfigurationError("noise variance must be nonnegative")
    if sigma_n2 == 0:
        return x.copy()
    return x + rng.normal(x.shape, np.sqrt(sigma_n2))


@dataclass
class SubcarrierObservation:
    """Received data-subcarrier values with the noise variance the receiver assumes.

    ``y`` may hold any number of subcarriers (any shape); ``prior`` then has
    a trailing axis of length 2^M.  ``distortion`` is the simulation-only
    diagnostic Y - alpha S - W and is never read by a receiver.
    """

    y: np.ndarray
    sigma_n2: float
    prior: np.ndarray | None = None
    distortion: np.ndarray | None = None

    def __post_init__(self):
        if not self.sigma_n2 > 0:
            raise ValueError("sigma_n2 must be positive")
        if self.prior is not None:
            p = np.asarray(self.prior)
            if np.any(p < -1e-12) or not np.allclose(p.sum(axis=-1), 1.0, atol=1e-9):
                raise ValueError("prior is not a valid PMF")

    def with_prior(self, prior) -> "SubcarrierObservation":
        return SubcarrierObservation(self.y, self.sigma_n2, np.asarray(prior), self.distortion)


def receive_subcarriers(y_time, N: int, sigma_n2: float) -> SubcarrierObservation:
    """Forward unitary DFT and extraction of data subcarriers 1..N/2-1."""
    y = np.asarray(y_time, dtype=float)
    if y.shape[-1] != N:
        raise ValueError(f"received block length {y.shape[-1]} != N = {N}")
    Y = dft(y, "forward")
    return SubcarrierObservation(Y[..., data_indices(N)], sigma_n2)
