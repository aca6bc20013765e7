"""Local gradient statistics, centering and one-bit compression.

Each device summarizes its gradient entries by a Gaussian prior (mean and
standard deviation), subtracts the mean and sends only the signs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradientMoments:
    """Mean and standard deviation of the entries of one local gradient."""

    mean: float
    std: float

    def __post_init__(self):
        if not np.isfinite(self.mean) or not np.isfinite(self.std):
            raise ValueError("moments must be finite")
        if self.std < 0:
            raise ValueError(f"std must be nonnegative, got {self.std}")


def _as_gradient(g) -> np.ndarray:
    g = np.asarray(g, dtype=float).ravel()
    if g.size == 0:
        raise ValueError("empty gradient")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    return g


def estimate_moments(g) -> GradientMoments:
    """Sample mean and population standard deviation (divisor M) of ``g``."""
    g = _as_gradient(g)
    mean = float(np.mean(g))
    std = float(np.sqrt(np.mean((g - mean) ** 2)))
    return GradientMoments(mean, std)


def center_gradient(g, moments: GradientMoments) -> np.ndarray:
    return _as_gradient(g) - moments.mean


def one_bit_quantize(gbar) -> np.ndarray:
    """Signs of ``gbar`` as +1/-1 with sign(0) = +1. Never emits 0."""
    gbar = np.asarray(gbar, dtype=float)
    if not np.all(np.isfinite(gbar)):
        raise ValueError("gradient has non-finite entries")
    return np.where(gbar >= 0, 1.0, -1.0)


def compress(g) -> tuple[GradientMoments, np.ndarray]:
    """Device-side pipeline: moments, centering, sign quantization."""
    moments = estimate_moments(g)
    return moments, one_bit_quantize(center_gradient(g, moments))


def uniform_levels(bits: int, lo: float, hi: float) -> np.ndarray:
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    if not lo < hi:
        raise ValueError(f"invalid quantizer range [{lo}, {hi}]")
    return np.linspace(lo, hi, 2**bits)


def _nearest_level(value: float, bits: int, lo: float, hi: float) -> float:
    step = (hi - lo) / (2**bits - 1)
    idx = np.rint((np.clip(value, lo, hi) - lo) / step)
    return float(lo + idx * step)


def quantize_moments(moments: GradientMoments, bits: int = 8,
                     mean_range=(-1.0, 1.0), std_range=None) -> GradientMoments:
    """B-bit uniform scalar quantization of the reported moments.

    Values outside the range are clamped first, so the reconstruction error
    for in-range inputs is at most half the level spacing. ``std_range``
    defaults to ``[0, mean_range[1]]``.
    """
    lo, hi = map(float, mean_range)
    uniform_levels(bits, lo, hi)  # validates bits and range
    if std_range is None:
        std_range = (0.0, max(hi, 0.0))
    slo, shi = map(float, std_range)
    uniform_levels(bits, slo, shi)
    mean_q = _nearest_level(moments.mean, bits, lo, hi)
    std_q = max(_nearest_level(moments.std, bits, slo, shi), 0.0)
    return GradientMoments(mean_q, std_q)
