"""Analytic error and convergence bounds and their Monte-Carlo counterparts."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .aggregation import (
    AggregationContext,
    bayaircomp,
    majority_estimate,
    naive_mean,
)

_TRIAL_CHUNK = 2000


@dataclass(frozen=True)
class BoundReport:
    analytic: float
    empirical: float
    samples: int
    standard_error: float
    satisfied: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    standard_error: float
    samples: int

    def within(self, target: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_sigma * self.standard_error

    def to_dict(self) -> dict:
        return asdict(self)


def mse_bound(M: int, K: int, stds) -> float:
    """(M / K^2) (1 + 2/pi) sum_k nu_k^2."""
    if M < 1 or K < 1:
        raise ValueError("M and K must be >= 1")
    stds = np.asarray(stds, dtype=float)
    return float(M / K**2 * (1.0 + 2.0 / np.pi) * np.sum(stds**2))


def true_gradient_variance(stds) -> float:
    """Per-coordinate variance of the average gradient, sum(nu^2) / K^2."""
    stds = np.asarray(stds, dtype=float)
    return float(np.sum(stds**2) / stds.size**2)


def inner_product_limits(M: int, stds) -> tuple[float, float]:
    """E[g_true^T (g_true - f)] at vanishing and at infinite SNR."""
    v = true_gradient_variance(stds)
    return M * v, M * (1.0 - 2.0 / np.pi) * v


def _simulate(ctx: AggregationContext, M: int, trials: int, rng: np.random.Generator):
    """Yield (local gradients, received symbols) in chunks of trials.

    Shapes: g is (n, K, M), y is (n, M). Transmission uses sign alignment,
    so device k arrives with amplitude |h_k|.
    """
    K = ctx.num_devices
    done = 0
    while done < trials:
        n = min(_TRIAL_CHUNK, trials - done)
        z = rng.standard_normal((n, K, M))
        g = ctx.means[None, :, None] + ctx.stds[None, :, None] * z
        signs = np.where(z >= 0, 1.0, -1.0)
        y = np.einsum("k,nkm->nm", ctx.magnitudes, signs)
        y = y + rng.normal(0.0, np.sqrt(ctx.noise_variance), size=y.shape)
        yield g, y
        done += n


def _summary(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, se


def empirical_mse(ctx: AggregationContext, M: int, trials: int,
                  rng: np.random.Generator) -> BoundReport:
    """Monte-Carlo E||f(y) - g_true||^2 against the analytic bound."""
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    errs = []
    for g, y in _simulate(ctx, M, trials, rng):
        e = bayaircomp(y, ctx) - g.mean(axis=1)
        errs.append(np.sum(e**2, axis=1))
    mean, se = _summary(np.concatenate(errs))
    bound = mse_bound(M, ctx.num_devices, ctx.stds)
    return BoundReport(bound, mean, trials, se, mean <= bound + 2 * se)


def compare_estimators(ctx: AggregationContext, trials: int,
                       rng: np.random.Generator, M: int = 1) -> dict[str, MonteCarloEstimate]:
    """Per-coordinate MSE of each estimator on the same draws."""
    estimators = {
        "bayaircomp": bayaircomp,
        "naive": naive_mean,
        "majority": majority_estimate,
    }
    errs = {name: [] for name in estimators}
    for g, y in _simulate(ctx, M, trials, rng):
        target = g.mean(axis=1)
        for name, fn in estimators.items():
            errs[name].append(np.mean((fn(y, ctx) - target) ** 2, axis=1))
    out = {}
    for name, chunks in errs.items():
        mean, se = _summary(np.concatenate(chunks))
        out[name] = MonteCarloEstimate(mean, se, trials)
    return out


def grad_error_inner_product(ctx: AggregationContext, M: int, trials: int,
                             rng: np.random.Generator,
                             noise_variance: float | None = None) -> MonteCarloEstimate:
    """Monte-Carlo E[g_true^T e] with the orientation e = g_true - f(y)."""
    if noise_variance is not None:
        ctx = AggregationContext(ctx.magnitudes, ctx.means, ctx.stds, noise_variance)
    vals = []
    for g, y in _simulate(ctx, M, trials, rng):
        g_true = g.mean(axis=1)
        vals.append(np.sum(g_true * (g_true - bayaircomp(y, ctx)), axis=1))
    mean, se = _summary(np.concatenate(vals))
    return MonteCarloEstimate(mean, se, trials)


def convergence_bound(T: int, lr: float, smoothness: float, mse: float, loss_gap: float) -> float:
    """Upper bound on the averaged squared gradient norm after T rounds
    with step sizes lr / (t + 1)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    half = smoothness * lr / 2.0
    if not 0 < half < 1:
        raise ValueError("step size violates smoothness condition")
    return float((loss_gap / (lr * (1 - half)) + mse * (1 + np.log(T)) * half / (1 - half)) / np.sqrt(T))


def linear_regression_smoothness(X) -> float:
    """Largest eigenvalue of the empirical second-moment matrix X^T X / N."""
    X = np.asarray(X, dtype=float)
    return float(np.linalg.eigvalsh(X.T @ X / X.shape[0])[-1])
