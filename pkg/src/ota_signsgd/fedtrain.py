"""Communication-round loop: sampling, local gradients, uplink, server update."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import aggregation as agg
from . import seeding
from .channel import CellGeometry, ChannelState, mac_receive, path_loss_cost231
from .data import Dataset, DeviceDataset
from .gradient_model import compress, quantize_moments
from .precoding import PrecoderSpec, effective_gain, precode

log = logging.getLogger(__name__)

AGGREGATORS = ("bayaircomp", "majority", "naive", "exact")
PATHLOSS_MODES = ("off", "relative", "raw")
LR_SCHEDULES = ("constant", "decay")


@dataclass(frozen=True)
class TrainingConfig:
    rounds: int = 500
    base_lr: float = 1e-3
    lr_schedule: str = "constant"
    momentum: float = 0.0
    devices_total: int = 100
    devices_per_round: int = 10
    devices_per_resource: int = 5
    batch_size: int = 32
    precoder: PrecoderSpec = field(default_factory=PrecoderSpec)
    aggregator: str = "bayaircomp"
    noise_variance: float = 0.5
    noiseless: bool = False
    pathloss: str = "off"
    quantize_moments: bool = False
    moment_bits: int = 8
    estimate_convention: str = "average"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.devices_per_round > self.devices_total:
            raise ValueError("devices_per_round exceeds devices_total")
        if self.devices_per_round % self.devices_per_resource:
            raise ValueError("devices_per_round must be divisible by devices_per_resource")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.pathloss not in PATHLOSS_MODES:
            raise ValueError(f"pathloss must be one of {PATHLOSS_MODES}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.estimate_convention not in ("average", "sum"):
            raise ValueError("estimate_convention must be 'average' or 'sum'")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    loss: float
    grad_norm_sq: float
    agg_mse: float
    accuracy: float | None = None


@dataclass
class TrainState:
    weights: np.ndarray
    prev_estimate: np.ndarray
    round: int = 0
    std_scale: float | None = None  # running std estimate for the moment quantizer


@dataclass
class Federation:
    """Everything fixed for a run: model, shards, geometry and evaluation data."""

    model: object
    devices: list[DeviceDataset]
    geometry: CellGeometry
    train: Dataset
    test: Dataset | None = None

    def evaluate(self, w):
        X, y = self.train.features, self.train.labels
        loss = self.model.loss(w, X, y)
        grad = self.model.gradient(w, X, y)
        acc = None
        if self.test is not None and hasattr(self.model, "predict"):
            acc = float(np.mean(self.model.predict(w, self.test.features) == self.test.labels))
        return loss, float(grad @ grad), acc


def lr_schedule(t: int, base_lr: float, mode: str = "decay") -> float:
    """``base_lr / (t + 1)`` in decay mode, ``base_lr`` in constant mode."""
    if t < 0:
        raise ValueError("round index must be >= 0")
    return base_lr / (t + 1) if mode == "decay" else base_lr


def global_update_gd(w, estimate, lr):
    return np.asarray(w, dtype=float) - lr * np.asarray(estimate, dtype=float)


def global_update_momentum(w, estimate, prev_estimate, lr, momentum):
    """w - lr * (momentum * previous estimate + estimate); previous is 0 at t = 0."""
    if not 0 <= momentum < 1:
        raise ValueError("momentum must be in [0, 1)")
    step = momentum * np.asarray(prev_estimate, dtype=float) + np.asarray(estimate, dtype=float)
    return np.asarray(w, dtype=float) - lr * step


def local_gradient(model, weights, data: DeviceDataset | Dataset, batch_size: int,
                   rng: np.random.Generator | None):
    """Mini-batch gradient of the local sample-average loss.

    Full batch when ``batch_size >= len(data)`` or ``rng`` is None, otherwise
    a batch drawn without replacement.
    """
    ds = data.data if isinstance(data, DeviceDataset) else data
    n = len(ds)
    if n == 0:
        raise ValueError("empty dataset")
    if rng is None or batch_size >= n:
        X, y = ds.features, ds.labels
    else:
        idx = rng.choice(n, size=batch_size, replace=False)
        X, y = ds.features[idx], ds.labels[idx]
    g = model.gradient(weights, X, y)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("local gradient has non-finite entries")
    return g


def _round_gains(fed: Federation, cfg: TrainingConfig, chosen, rng) -> np.ndarray:
    small_scale = rng.normal(0.0, np.sqrt(0.5), size=chosen.size)
    if cfg.pathloss == "off":
        return small_scale
    amp = path_loss_cost231(fed.geometry.distances[chosen], fed.geometry)
    if cfg.pathloss == "relative":
        amp = amp / amp.max()
    return amp * small_scale


def _aggregate(y, ctx: agg.AggregationContext, cfg: TrainingConfig):
    if cfg.aggregator == "bayaircomp":
        return agg.bayaircomp(y, ctx, cfg.estimate_convention)
    if cfg.aggregator == "majority":
        return agg.majority_vote(y)
    if np.sum(ctx.magnitudes) == 0:
        est = np.full_like(y, ctx.prior_mean)
    else:
        est = agg.naive_mean(y, ctx)
    return est * ctx.num_devices if cfg.estimate_convention == "sum" else est


def run_round(state: TrainState, fed: Federation, cfg: TrainingConfig,
              rng: np.random.Generator) -> tuple[TrainState, RoundMetrics, int]:
    """One communication round. Returns the new state, the metrics measured
    at the incoming weights, and the number of MAC receptions performed."""
    w = state.weights
    with np.errstate(over="ignore", invalid="ignore"):
        loss, grad_norm_sq, acc = fed.evaluate(w)
    for name, value in (("loss", loss), ("grad_norm_sq", grad_norm_sq)):
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite {name} at round {state.round}")

    chosen = rng.choice(cfg.devices_total, size=cfg.devices_per_round, replace=False)
    gains = _round_gains(fed, cfg, chosen, rng)
    try:
        grads = np.stack([local_gradient(fed.model, w, fed.devices[k], cfg.batch_size, rng)
                          for k in chosen])
    except FloatingPointError as exc:
        raise FloatingPointError(f"{exc} at round {state.round}") from None
    g_true = grads.mean(axis=0)

    std_scale = state.std_scale
    receptions = 0
    if cfg.aggregator == "exact":
        estimate = g_true * (cfg.devices_per_round if cfg.estimate_convention == "sum" else 1)
    else:
        block_estimates = []
        for block in np.split(np.arange(cfg.devices_per_round), cfg.devices_per_round // cfg.devices_per_resource):
            tx, moments, eff = [], [], []
            for i in block:
                m, signs = compress(grads[i])
                if cfg.quantize_moments:
                    scale = std_scale if std_scale else m.std or 1.0
                    m = quantize_moments(m, cfg.moment_bits, (-4 * scale, 4 * scale), (0.0, 4 * scale))
                tx.append(precode(gains[i], signs, cfg.precoder))
                moments.append(m)
                eff.append(effective_gain(gains[i], cfg.precoder))
            channel = ChannelState(gains[block], cfg.noise_variance)
            y = mac_receive(np.stack(tx), channel, None if cfg.noiseless else rng)
            receptions += 1
            ctx = agg.AggregationContext.from_moments(eff, moments, cfg.noise_variance)
            block_estimates.append(_aggregate(y, ctx, cfg))
        estimate = np.mean(block_estimates, axis=0)
        if cfg.quantize_moments:
            std_scale = float(np.mean([np.sqrt(np.mean((g - g.mean()) ** 2)) for g in grads])) or std_scale

    agg_mse = float(np.sum((estimate - g_true) ** 2))
    lr = lr_schedule(state.round, cfg.base_lr, "decay" if cfg.lr_schedule == "decay" else "constant")
    new_w = global_update_momentum(w, estimate, state.prev_estimate, lr, cfg.momentum)
    metrics = RoundMetrics(state.round, loss, grad_norm_sq, agg_mse, acc)
    if not np.isfinite(agg_mse):
        raise FloatingPointError(f"non-finite agg_mse at round {state.round}")
    new_state = TrainState(new_w, np.asarray(estimate, dtype=float), state.round + 1, std_scale)
    return new_state, metrics, receptions


def train(fed: Federation, cfg: TrainingConfig, seed: int, init_weights=None):
    """Run ``cfg.rounds`` rounds; returns (final state, metrics list, final loss)."""
    if init_weights is None:
        w0 = fed.model.init(seeding.stream(seed, seeding.INIT))
    else:
        w0 = np.asarray(init_weights, dtype=float)
    state = TrainState(w0, np.zeros_like(w0))
    history = []
    for t in range(cfg.rounds):
        state, metrics, _ = run_round(state, fed, cfg, seeding.stream(seed, seeding.ROUNDS, t))
        history.append(metrics)
        if t % 100 == 0:
            log.debug("round %d loss %.6g", t, metrics.loss)
    with np.errstate(over="ignore", invalid="ignore"):
        final_loss = fed.evaluate(state.weights)[0]
    if not np.isfinite(final_loss):
        raise FloatingPointError(f"non-finite loss at round {cfg.rounds}")
    return state, history, final_loss
