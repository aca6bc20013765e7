"""Server-side estimators of the average gradient from one superposed symbol.

Every estimator here works coordinate-wise on ``y`` (scalar or array) and
only sees the channel magnitudes, the reported moments and the noise
variance; never the raw local gradients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gradient_model import GradientMoments
from .quadrature import symmetric_normal_rule

SQRT_2_OVER_PI = float(np.sqrt(2.0 / np.pi))
K_MAX = 20
ORACLE_K_MAX = 3
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class AggregationContext:
    """Side information for one resource block in one round."""

    magnitudes: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    noise_variance: float = 0.5

    def __post_init__(self):
        h = np.asarray(self.magnitudes, dtype=float).ravel()
        mu = np.asarray(self.means, dtype=float).ravel()
        nu = np.asarray(self.stds, dtype=float).ravel()
        if h.size < 1:
            raise ValueError("need at least one device")
        if not (h.size == mu.size == nu.size):
            raise ValueError("magnitudes, means and stds must have equal length")
        if np.any(h < 0) or np.any(nu < 0):
            raise ValueError("magnitudes and stds must be nonnegative")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        for name, arr in (("magnitudes", h), ("means", mu), ("stds", nu)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_moments(cls, magnitudes, moments: Sequence[GradientMoments],
                     noise_variance: float = 0.5) -> "AggregationContext":
        return cls(np.abs(np.asarray(magnitudes, dtype=float)),
                   [m.mean for m in moments], [m.std for m in moments], noise_variance)

    @property
    def num_devices(self) -> int:
        return self.magnitudes.size

    @property
    def prior_mean(self) -> float:
        return float(np.mean(self.means))


def sign_patterns(num_devices: int) -> np.ndarray:
    """All 2^K vectors in {-1, +1}^K as a (2^K, K) array."""
    if num_devices > K_MAX:
        raise ValueError(f"enumeration bound exceeded: K={num_devices} > {K_MAX}")
    return np.array(list(itertools.product((-1.0, 1.0), repeat=num_devices)))


def posterior_sign_means(y, ctx: AggregationContext) -> np.ndarray:
    """A_k(y) for every device, shape ``np.shape(y) + (K,)``.

    A_k is the posterior mean of the k-th transmitted sign: the difference of
    the pattern weights with b_k = +1 and b_k = -1, over their total. Weights
    are exponentiated after subtracting the per-symbol maximum exponent, so
    the denominator always contains a term equal to 1.
    """
    patterns = sign_patterns(ctx.num_devices)
    levels = patterns @ ctx.magnitudes
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    out = np.empty((flat.size, ctx.num_devices))
    chunk = max(1, _CHUNK_ELEMENTS // len(levels))
    for start in range(0, flat.size, chunk):
        yc = flat[start:start + chunk, None]
        expo = -((yc - levels) ** 2) / (2.0 * ctx.noise_variance)
        w = np.exp(expo - expo.max(axis=1, keepdims=True))
        out[start:start + chunk] = (w @ patterns) / w.sum(axis=1, keepdims=True)
    np.clip(out, -1.0, 1.0, out=out)  # rounding can overshoot by an ulp
    return out.reshape(y.shape + (ctx.num_devices,))


def a_term(y, ctx: AggregationContext, k: int):
    """A_k(y) for device ``k`` (0-based)."""
    if not 0 <= k < ctx.num_devices:
        raise IndexError(f"device index {k} out of range for K={ctx.num_devices}")
    return posterior_sign_means(y, ctx)[..., k]


def bayaircomp(y, ctx: AggregationContext, convention: str = "average"):
    """MMSE estimate of the average (or, with ``convention='sum'``, the sum)
    of the local gradient coordinates given the received symbol(s) ``y``."""
    a = posterior_sign_means(y, ctx)
    est = np.mean(ctx.means + SQRT_2_OVER_PI * ctx.stds * a, axis=-1)
    if convention == "sum":
        return est * ctx.num_devices
    if convention != "average":
        raise ValueError(f"unknown convention {convention!r}")
    return est


def majority_vote(y) -> np.ndarray:
    """Sign decoder of the superposed symbols, sign(0) = +1."""
    return np.where(np.asarray(y, dtype=float) >= 0, 1.0, -1.0)


def majority_estimate(y, ctx: AggregationContext):
    """Majority vote rescaled to the prior: the mean plus sqrt(2/pi) times
    the average std, with the decoded sign."""
    return ctx.prior_mean + SQRT_2_OVER_PI * float(np.mean(ctx.stds)) * majority_vote(y)


def naive_mean(y, ctx: AggregationContext):
    """Linear rescaling baseline: y / sum|h| plus the average prior mean."""
    total = float(np.sum(ctx.magnitudes))
    if total <= 0:
        raise ValueError("all-zero channel: naive mean undefined")
    return np.asarray(y, dtype=float) / total + ctx.prior_mean


def mmse_oracle(y, ctx: AggregationContext, quadrature_order: int = 64):
    """Posterior mean by brute-force K-dimensional quadrature.

    Integrates g * P(y | g) * p(g) and P(y | g) * p(g) over the product of
    Gaussian priors on a tensor grid of half-range Gauss-Hermite nodes
    (``quadrature_order`` per half-axis), evaluating the sign likelihood at
    every node. Exponential cost; meant for validation at K <= 3.
    """
    K = ctx.num_devices
    if K > ORACLE_K_MAX:
        raise ValueError(f"oracle supports K <= {ORACLE_K_MAX}, got {K}")
    if quadrature_order < 32:
        raise ValueError("quadrature_order must be >= 32")
    z, wz = symmetric_normal_rule(quadrature_order)
    std_nodes = np.stack([g.ravel() for g in np.meshgrid(*([z] * K), indexing="ij")], axis=1)
    weight = np.prod(np.meshgrid(*([wz] * K), indexing="ij"), axis=0).ravel()
    # Sign is taken on the standardized node so a zero-variance device keeps
    # its symmetric sign prior.
    received = np.where(std_nodes >= 0, 1.0, -1.0) @ ctx.magnitudes
    centered = std_nodes * ctx.stds

    ys = np.asarray(y, dtype=float)
    out = np.empty(ys.size)
    for i, yi in enumerate(ys.ravel()):
        expo = -((yi - received) ** 2) / (2.0 * ctx.noise_variance)
        lik = np.exp(expo - expo.max()) * weight
        out[i] = ctx.prior_mean + np.mean(lik @ centered) / lik.sum()
    return out.reshape(ys.shape) if ys.ndim else float(out[0])


def curve(y_grid, ctx: AggregationContext) -> dict[str, np.ndarray]:
    """Aggregation-function curves on a grid of received values."""
    y_grid = np.asarray(y_grid, dtype=float)
    return {
        "y": y_grid,
        "bayaircomp": bayaircomp(y_grid, ctx),
        "majority": majority_estimate(y_grid, ctx),
        "naive": naive_mean(y_grid, ctx),
    }
