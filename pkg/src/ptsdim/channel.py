"""Flat Rayleigh channels, imperfect CSIT and complex Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigError",
    "ChannelSet",
    "crandn",
    "draw_channel",
    "draw_noise",
    "sigma2_for_snr",
]


class ConfigError(ValueError):
    """Invalid or infeasible configuration."""


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ChannelSet:
    """True channel ``h_true`` and the transmitter's estimate ``h_csit``.

    Both are ``(n_u * n_rx, n_tx)``; user ``k`` owns rows
    ``[k * n_rx, (k + 1) * n_rx)``.
    """

    h_true: np.ndarray
    h_csit: np.ndarray
    n_rx: int
    sigma_err: float = 0.0

    @property
    def n_u(self) -> int:
        return self.h_true.shape[0] // self.n_rx

    @property
    def n_tx(self) -> int:
        return self.h_true.shape[1]

    def user_rows(self, k: int, csit: bool = False) -> np.ndarray:
        h = self.h_csit if csit else self.h_true
        return h[k * self.n_rx:(k + 1) * self.n_rx]

    def blocks(self, csit: bool = False) -> np.ndarray:
        """Per-user view with shape ``(n_u, n_rx, n_tx)``."""
        h = self.h_csit if csit else self.h_true
        return h.reshape(self.n_u, self.n_rx, self.n_tx)


def draw_channel(rng: np.random.Generator, n_u: int, n_rx: int, n_tx: int,
                 sigma_err: float = 0.0) -> ChannelSet:
    """Draw one channel realisation.

    With ``sigma_err > 0`` the CSIT entries are CN(0, 1 - sigma_err**2)
    and the error entries CN(0, sigma_err**2), so the true channel keeps
    unit per-entry variance.
    """
    if not 0.0 <= sigma_err < 1.0:
        raise ConfigError(f"sigma_err must lie in [0, 1), got {sigma_err}")
    shape = (n_u * n_rx, n_tx)
    if sigma_err == 0.0:
        h = crandn(rng, shape)
        return ChannelSet(h_true=h, h_csit=h, n_rx=n_rx, sigma_err=0.0)
    h_bar = crandn(rng, shape, 1.0 - sigma_err ** 2)
    h_err = crandn(rng, shape, sigma_err ** 2)
    return ChannelSet(h_true=h_bar + h_err, h_csit=h_bar, n_rx=n_rx, sigma_err=sigma_err)


def draw_noise(rng: np.random.Generator, shape, sigma2: float,
               noiseless: bool = False) -> np.ndarray:
    """Noise with real and imaginary parts each N(0, sigma2).

    ``sigma2 = 0`` is only accepted together with ``noiseless=True``.
    """
    if noiseless:
        return np.zeros(shape, dtype=complex)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive (use noiseless=True for a clean channel)")
    return crandn(rng, shape, 2.0 * sigma2)


def sigma2_for_snr(snr_db: float, n_rx: int, calibration: float) -> float:
    """Per-real-dimension noise variance for a per-user SNR.

    ``calibration`` is the mean received signal energy per user; the
    result satisfies ``2 * sigma2 * n_rx * 10**(snr_db/10) == calibration``.
    """
    if not calibration > 0:
        raise ValueError(f"calibration must be positive, got {calibration}")
    return calibration / (2.0 * n_rx * 10.0 ** (snr_db / 10.0))
