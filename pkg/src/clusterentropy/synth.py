"""Fractional Brownian motion null models.

Paths are cumulative sums of fractional Gaussian noise drawn by circulant
embedding (Davies-Harte), which reproduces the fGn covariance exactly in
O(N log N). If the embedding has negative eigenvalues the generator falls
back to Hosking's exact O(N^2) recursion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .series import HorizonSchedule, Origin, PriceSeries

# relative size of a negative eigenvalue still treated as rounding noise
_EIGEN_TOL = 1e-10


class EmbeddingWarning(RuntimeWarning):
    pass


def fgn_autocovariance(k, hurst: float) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise at lag ``k``."""
    k = np.abs(np.asarray(k, dtype=np.float64))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _circulant_eigenvalues(size: int, hurst: float) -> np.ndarray:
    gamma = fgn_autocovariance(np.arange(size + 1), hurst)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(row).real


def _hosking(size: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Durbin-Levinson conditional sampling, exact for any stationary covariance."""
    gamma = fgn_autocovariance(np.arange(size), hurst)
    z = rng.standard_normal(size)
    out = np.empty(size)
    out[0] = z[0]
    phi = np.zeros(size)
    var = 1.0
    for t in range(1, size):
        prev = phi[: t - 1].copy()
        k = (gamma[t] - prev @ gamma[t - 1 : 0 : -1]) / var
        phi[: t - 1] = prev - k * prev[::-1]
        phi[t - 1] = k
        var *= 1.0 - k * k
        out[t] = phi[:t] @ out[t - 1 :: -1] + np.sqrt(var) * z[t]
    return out


def fractional_gaussian_noise(size: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"Hurst exponent must lie in (0, 1), got {hurst}")
    if size < 1:
        raise ValueError("size must be positive")
    lam = _circulant_eigenvalues(size, hurst)
    if lam.min() < -_EIGEN_TOL * max(lam.max(), 1.0):
        warnings.warn(
            f"circulant embedding not non-negative for H={hurst}, N={size}; "
            "using the O(N^2) Hosking method",
            EmbeddingWarning,
            stacklevel=2,
        )
        return _hosking(size, hurst, rng)
    lam = np.clip(lam, 0.0, None)
    m = len(lam)
    w = np.sqrt(lam / m) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return np.fft.fft(w).real[:size]


@dataclass(frozen=True)
class FbmConfig:
    hurst: float
    length: int
    seed: int = 0
    segment_lengths: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.hurst}")
        if self.length < 2:
            raise ValueError("fBm length must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.segment_lengths is not None:
            seg = tuple(int(v) for v in self.segment_lengths)
            object.__setattr__(self, "segment_lengths", seg)
            if any(b <= a for a, b in zip(seg, seg[1:])):
                raise ValueError("segment lengths must be strictly increasing")
            if seg and seg[-1] != self.length:
                raise ValueError("last segment length must equal the path length")


def generate_fbm(config: FbmConfig) -> PriceSeries:
    """One fBm path of ``config.length`` points starting at 0."""
    rng = np.random.default_rng(config.seed)
    increments = fractional_gaussian_noise(config.length - 1, config.hurst, rng)
    path = np.concatenate(([0.0], np.cumsum(increments)))
    return PriceSeries(path, Origin.synthetic(config.seed, config.hurst), f"fbm_H{config.hurst:g}_s{config.seed}")


def mirror_market_schedule(
    config: FbmConfig, market_lengths: Sequence[int]
) -> tuple[PriceSeries, HorizonSchedule]:
    """fBm path as long as the longest market horizon, cut at the same lengths."""
    lengths = tuple(int(v) for v in market_lengths)
    schedule = HorizonSchedule(lengths, "segment")
    cfg = FbmConfig(config.hurst, lengths[-1], config.seed, lengths)
    return generate_fbm(cfg), schedule
