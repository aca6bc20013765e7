"""Suite runners behind the CLI: train, curves, bounds and oracle."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import aggregation as agg
from . import analysis, plotting, report, seeding
from .config import ExperimentConfig, build_geometry
from .data import load_dataset, partition_heterogeneous, partition_iid
from .fedtrain import Federation, train
from .models import build_model

log = logging.getLogger(__name__)

SNR_DEFINITION = "P * mean(h^2) / noise_variance (normalized gains)"


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    return {"config_sha256": cfg.digest(), "seed": cfg.seed, "suite": cfg.suite, **extra}


def build_federation(cfg: ExperimentConfig) -> Federation:
    """Dataset, shards, cell geometry and model, all from the master seed."""
    seed = cfg.seed
    data = load_dataset(cfg.dataset_spec(seed))
    train_set, test_set = data.split(cfg.test_fraction, seeding.stream(seed, seeding.DATA, 1))
    part_rng = seeding.stream(seed, seeding.PARTITION)
    if train_set.num_classes is None:
        devices = partition_iid(train_set, cfg.devices_total, part_rng)
    else:
        devices = partition_heterogeneous(train_set, cfg.devices_total,
                                          min(cfg.classes_per_device, train_set.num_classes), part_rng)
    geometry = build_geometry(cfg, seeding.stream(seed, seeding.GEOMETRY))
    model = build_model(cfg.model_kind, train_set.num_features, train_set.num_classes, cfg.hidden_units)
    return Federation(model, devices, geometry, train_set, test_set)


def run_train(cfg: ExperimentConfig, out: Path) -> dict:
    fed = build_federation(cfg)
    tcfg = cfg.training()
    _, history, final_loss = train(fed, tcfg, cfg.seed)
    meta = _meta(cfg, snr_definition=SNR_DEFINITION)
    rows = [(m.round, m.loss, m.grad_norm_sq, m.agg_mse, m.accuracy) for m in history]
    report.write_csv(out / "metrics.csv", meta,
                     ("round", "loss", "grad_norm_sq", "agg_mse", "accuracy"), rows)
    initial = history[0].loss
    summary = {
        "meta": meta,
        "aggregator": cfg.aggregator,
        "precoder": cfg.precoder,
        "rounds": cfg.rounds,
        "receptions_per_round": tcfg.devices_per_round // tcfg.devices_per_resource,
        "initial_loss": initial,
        "final_loss": final_loss,
        "loss_reduction": 1.0 - final_loss / initial if initial > 0 else None,
        "final_accuracy": history[-1].accuracy,
        "mean_grad_norm_sq": float(np.mean([m.grad_norm_sq for m in history])),
        "mean_agg_mse": float(np.mean([m.agg_mse for m in history])),
    }
    if cfg.model_kind == "linear":
        summary["smoothness"] = analysis.linear_regression_smoothness(fed.train.features)
    report.write_json(out / "summary.json", summary)
    if cfg.plot:
        plotting.plot_training(history, out / "training.png", meta)
    return summary


def _curve_profiles(cfg: ExperimentConfig) -> dict[str, np.ndarray]:
    homogeneous = np.ones(cfg.curve_devices)
    heterogeneous = homogeneous.copy()
    heterogeneous[0] = cfg.curve_peak_gain
    return {"homogeneous": homogeneous, "heterogeneous": heterogeneous}


def run_curves(cfg: ExperimentConfig, out: Path) -> dict:
    y = np.linspace(-cfg.curve_y_max, cfg.curve_y_max, cfg.curve_points)
    K = cfg.curve_devices
    files, panels = [], {}
    for profile, gains in _curve_profiles(cfg).items():
        panels[profile] = []
        for i, nv in enumerate(cfg.curve_noise_variances):
            ctx = agg.AggregationContext(gains, np.zeros(K), np.ones(K), nv)
            c = agg.curve(y, ctx)
            snr_db = 10 * np.log10(cfg.power_limit * np.mean(gains**2) / nv)
            meta = _meta(cfg, profile=profile, noise_variance=nv, snr_db=snr_db,
                         snr_definition=SNR_DEFINITION,
                         gains=" ".join(report.format_number(g) for g in gains))
            name = f"curve_{profile}_{i}.csv"
            report.write_csv(out / name, meta, ("y", "bayaircomp", "majority", "naive"),
                             zip(c["y"], c["bayaircomp"], c["majority"], c["naive"]))
            files.append(name)
            panels[profile].append((f"BayAirComp, SNR {snr_db:.1f} dB", y, c["bayaircomp"]))
        panels[profile].append(("majority vote (scaled)", y, c["majority"]))
    summary = {"meta": _meta(cfg, snr_definition=SNR_DEFINITION), "files": files}
    report.write_json(out / "curves.json", summary)
    if cfg.plot:
        plotting.plot_curves(panels, out / "curves.png", _meta(cfg))
    return summary


def run_bounds(cfg: ExperimentConfig, out: Path) -> dict:
    rng = seeding.stream(cfg.seed, seeding.BOUNDS)
    K = cfg.bounds_devices
    ctx = agg.AggregationContext(np.ones(K), np.zeros(K), np.ones(K), cfg.noise_variance)
    mse_report = analysis.empirical_mse(ctx, cfg.bounds_dim, cfg.bounds_trials, rng)
    estimators = analysis.compare_estimators(ctx, cfg.bounds_trials, rng)

    gains = np.asarray(cfg.inner_product_gains, dtype=float)
    cctx = agg.AggregationContext(gains, np.zeros(gains.size), np.ones(gains.size), cfg.noise_variance)
    low_target, high_target = analysis.inner_product_limits(cfg.inner_product_dim, cctx.stds)
    limits = {}
    for label, nv, target in (("snr_to_zero", 1e8, low_target), ("snr_to_infinity", 1e-8, high_target)):
        est = analysis.grad_error_inner_product(cctx, cfg.inner_product_dim, cfg.inner_product_trials, rng, nv)
        limits[label] = {**est.to_dict(), "noise_variance": nv, "analytic": target,
                         "within_3se": est.within(target, 3.0)}

    horizons = list(cfg.convergence_horizons)
    bounds = [analysis.convergence_bound(T, cfg.convergence_lr, cfg.convergence_smoothness,
                                         cfg.convergence_mse, cfg.convergence_loss_gap)
              for T in horizons]
    payload = {
        "meta": _meta(cfg),
        "mse_bound": {**mse_report.to_dict(), "devices": K, "dim": cfg.bounds_dim,
                      "noise_variance": cfg.noise_variance},
        "estimator_mse": {name: e.to_dict() for name, e in estimators.items()},
        "inner_product": limits,
        "convergence": {
            "horizons": horizons, "bounds": bounds,
            "decreasing": bool(np.all(np.diff(bounds) < 0)),
            "lr": cfg.convergence_lr, "smoothness": cfg.convergence_smoothness,
            "mse": cfg.convergence_mse, "loss_gap": cfg.convergence_loss_gap,
        },
    }
    report.write_json(out / "bounds.json", payload)
    if cfg.plot:
        plotting.plot_convergence(horizons, bounds, out / "convergence.png", _meta(cfg))
    return payload


def oracle_cases(num_configs: int, rng: np.random.Generator):
    """Random (K, context, y) draws over the validated parameter box."""
    for K in (1, 2, 3):
        for _ in range(num_configs):
            ctx = agg.AggregationContext(rng.uniform(0.1, 3.0, K), rng.uniform(-1.0, 1.0, K),
                                         rng.uniform(0.2, 2.0, K), rng.uniform(0.1, 4.0))
            yield K, ctx, float(rng.uniform(-10.0, 10.0))


def run_oracle(cfg: ExperimentConfig, out: Path) -> dict:
    rng = seeding.stream(cfg.seed, seeding.ORACLE)
    rows, worst = [], 0.0
    for K, ctx, y in oracle_cases(cfg.oracle_configs, rng):
        closed = float(agg.bayaircomp(y, ctx))
        oracle = float(agg.mmse_oracle(y, ctx, cfg.oracle_order))
        diff = abs(closed - oracle)
        worst = max(worst, diff)
        pad = [None] * (3 - K)
        rows.append([K, y, ctx.noise_variance, *ctx.magnitudes, *pad, *ctx.means, *pad,
                     *ctx.stds, *pad, closed, oracle, diff])
    cols = (["devices", "y", "noise_variance"] + [f"gain_{i}" for i in (1, 2, 3)]
            + [f"mean_{i}" for i in (1, 2, 3)] + [f"std_{i}" for i in (1, 2, 3)]
            + ["closed_form", "oracle", "abs_diff"])
    report.write_csv(out / "oracle.csv", _meta(cfg, quadrature_order=cfg.oracle_order), cols, rows)
    summary = {"meta": _meta(cfg), "cases": len(rows), "max_abs_diff": worst,
               "quadrature_order": cfg.oracle_order}
    report.write_json(out / "oracle.json", summary)
    return summary


SUITE_RUNNERS = {"train": run_train, "curves": run_curves, "bounds": run_bounds, "oracle": run_oracle}


def run_suite(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("suite %s seed %d -> %s", cfg.suite, cfg.seed, out)
    return SUITE_RUNNERS[cfg.suite](cfg, out)
