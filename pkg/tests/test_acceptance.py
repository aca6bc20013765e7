"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (bypassing output capture) before
asserting, so the run log doubles as the acceptance report.
"""

import dataclasses
import time
from pathlib import Path

import numpy as np
import pytest

from ota_signsgd import seeding
from ota_signsgd.aggregation import AggregationContext, bayaircomp, mmse_oracle
from ota_signsgd.analysis import (
    compare_estimators,
    convergence_bound,
    empirical_mse,
    grad_error_inner_product,
    inner_product_limits,
    mse_bound,
)
from ota_signsgd.config import ExperimentConfig
from ota_signsgd.experiments import build_federation, oracle_cases, run_suite
from ota_signsgd.fedtrain import train

SQ = np.sqrt(2 / np.pi)

# Paired-draw MSEs at K=5, |h|=1, mu=0, nu=1, noise 0.5, M=1, 1e5 draws from
# stream(0, BOUNDS, 1); computed once and frozen as a regression anchor.
FROZEN_MSE = {"bayaircomp": 0.08280780485412434,
              "naive": 0.10044278615331224,
              "majority": 0.3838450108332038}


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok
    return emit


def unit_ctx(K, s2=0.5, gains=None):
    gains = np.ones(K) if gains is None else np.asarray(gains, dtype=float)
    return AggregationContext(gains, np.zeros(K), np.ones(K), s2)


def test_oracle_equivalence(report):
    start = time.perf_counter()
    worst, count = 0.0, 0
    for _, ctx, y in oracle_cases(100, seeding.stream(0, seeding.ORACLE)):
        worst = max(worst, abs(bayaircomp(y, ctx) - mmse_oracle(y, ctx, 64)))
        count += 1
    ref = unit_ctx(2, gains=[1.0, 0.5])
    ref_diff = abs(bayaircomp(1.5, ref) - mmse_oracle(1.5, ref, 64))
    elapsed = time.perf_counter() - start
    ok = count == 300 and worst < 1e-5 and ref_diff < 1e-6 and elapsed < 60
    report("oracle equivalence", ok,
           f"{count} cases, max |diff| {worst:.2e} (< 1e-5), reference case {ref_diff:.2e}, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_soft_step_curve_shape(report):
    start = time.perf_counter()
    ctx = unit_ctx(5)
    y = np.linspace(-10, 10, 2001)
    f = bayaircomp(y, ctx)
    odd = np.max(np.abs(f + f[::-1]))
    bounded = np.all(np.abs(f) <= SQ + 1e-15)
    tail = np.abs(y) >= 8
    sat = np.max(np.abs(np.abs(f[tail]) - 0.79788))
    mono = np.min(np.diff(f))
    elapsed = time.perf_counter() - start
    ok = odd < 1e-12 and bounded and sat < 1e-3 and mono >= 0 and elapsed < 10
    report("soft-step curve shape", ok,
           f"odd err {odd:.1e}, bounded {bool(bounded)}, saturation err {sat:.2e} (< 1e-3), "
           f"min step {mono:.2e} (>= 0), {elapsed:.2f} s")
    assert ok


def test_mse_bound(report):
    start = time.perf_counter()
    r = empirical_mse(unit_ctx(5), 100, 10_000, seeding.stream(0, seeding.BOUNDS))
    elapsed = time.perf_counter() - start
    margin = (r.analytic - r.empirical) / r.standard_error
    ok = abs(r.analytic - mse_bound(100, 5, np.ones(5))) < 1e-12 and margin >= 2 and elapsed < 120
    report("MSE bound", ok,
           f"empirical {r.empirical:.4f} (SE {r.standard_error:.4f}) <= bound {r.analytic:.4f}, "
           f"margin {margin:.0f} SE (>= 2), {elapsed:.1f} s")
    assert ok


def test_inner_product_limits(report):
    start = time.perf_counter()
    # distinct gains so every sign pattern is identifiable as the noise vanishes
    ctx = unit_ctx(2, gains=[1.0, 0.5])
    rng = seeding.stream(0, seeding.BOUNDS, 2)
    low_target, high_target = inner_product_limits(10, ctx.stds)
    low = grad_error_inner_product(ctx, 10, 100_000, rng, 1e8)
    high = grad_error_inner_product(ctx, 10, 100_000, rng, 1e-8)
    elapsed = time.perf_counter() - start
    z_low = (low.mean - low_target) / low.standard_error
    z_high = (high.mean - high_target) / high.standard_error
    ok = (low_target == pytest.approx(5.0) and high_target == pytest.approx(1.8169, abs=1e-4)
          and abs(z_low) <= 3 and abs(z_high) <= 3 and elapsed < 120)
    report("inner-product limits", ok,
           f"low SNR {low.mean:.4f} vs {low_target:.4f} ({z_low:+.2f} SE), "
           f"high SNR {high.mean:.4f} vs {high_target:.4f} ({z_high:+.2f} SE), {elapsed:.1f} s")
    assert ok


def test_convergence_bound_arithmetic(report):
    value = convergence_bound(100, 0.1, 1, 1, 1)
    horizons = [convergence_bound(T, 0.1, 1, 1, 1) for T in (100, 10_000, 1_000_000)]
    ok = abs(value - 1.0821) <= 1e-3 and horizons[0] > horizons[1] > horizons[2]
    report("convergence bound", ok,
           f"bound(100) = {value:.6f} (1.0821 +/- 1e-3), T=1e2,1e4,1e6 -> "
           + ", ".join(f"{b:.5f}" for b in horizons))
    assert ok


def test_mmse_dominance(report):
    out = compare_estimators(unit_ctx(5), 100_000, seeding.stream(0, seeding.BOUNDS, 1))
    bay = out["bayaircomp"].mean
    gain_naive = 1 - bay / out["naive"].mean
    gain_major = 1 - bay / out["majority"].mean
    anchored = all(out[k].mean == pytest.approx(v, rel=1e-9) for k, v in FROZEN_MSE.items())
    # closed form for the naive baseline: (K (2 - 2 sqrt(2/pi)) + noise) / K^2
    naive_exact = (5 * (2 - 2 * SQ) + 0.5) / 25
    naive_z = (out["naive"].mean - naive_exact) / out["naive"].standard_error
    ok = gain_naive >= 0.05 and gain_major >= 0.05 and anchored and abs(naive_z) <= 3
    report("MMSE dominance", ok,
           f"bayaircomp {bay:.5f}, naive {out['naive'].mean:.5f} (-{100 * gain_naive:.1f}%), "
           f"majority {out['majority'].mean:.5f} (-{100 * gain_major:.1f}%), "
           f"frozen anchors {'match' if anchored else 'DIFFER'}, naive vs closed form {naive_z:+.2f} SE")
    assert ok


def _final_losses(cfg, seeds):
    initial, final = [], []
    for s in seeds:
        run = dataclasses.replace(cfg, seed=s)
        _, history, last = train(build_federation(run), run.training(), s)
        initial.append(history[0].loss)
        final.append(last)
    return np.array(initial), np.array(final)


@pytest.mark.slow
def test_end_to_end_learning(report):
    start = time.perf_counter()
    seeds = range(5)
    proposed = ExperimentConfig(rounds=500, base_lr=1e-3, momentum=0.9, aggregator="bayaircomp",
                                precoder="sign_align").validate()
    baseline = dataclasses.replace(proposed, aggregator="majority", precoder="truncated_inversion",
                                   momentum=0.0).validate()
    init, final = _final_losses(proposed, seeds)
    _, base_final = _final_losses(baseline, seeds)
    elapsed = time.perf_counter() - start
    drop = 1 - final / init
    ok = np.all(drop >= 0.5) and final.mean() <= base_final.mean() and elapsed < 600
    report("end-to-end learning", ok,
           f"loss drop per seed {', '.join(f'{100 * d:.1f}%' for d in drop)} (>= 50%), "
           f"mean final loss bayaircomp {final.mean():.4f} <= majority {base_final.mean():.4f}, "
           f"{elapsed:.0f} s")
    assert ok


SMALL_SUITES = {
    "train": dict(rounds=20, n_samples=1500, plot=True),
    "curves": dict(curve_points=201),
    "bounds": dict(bounds_trials=1000, bounds_dim=10, inner_product_trials=2000),
    "oracle": dict(oracle_configs=3, oracle_order=32),
}


def test_determinism(report, tmp_path):
    mismatched, checked = [], 0
    for suite, extra in SMALL_SUITES.items():
        outputs = []
        for rerun in ("a", "b"):
            cfg = ExperimentConfig(suite=suite, seed=11, output_dir=str(tmp_path / suite / rerun),
                                   **extra).validate()
            run_suite(cfg)
            outputs.append(Path(cfg.output_dir))
        names = sorted(p.name for p in outputs[0].iterdir() if p.suffix in (".csv", ".json"))
        for name in names:
            checked += 1
            if (outputs[0] / name).read_bytes() != (outputs[1] / name).read_bytes():
                mismatched.append(f"{suite}/{name}")
    ok = checked >= 8 and not mismatched
    report("determinism", ok,
           f"{checked} CSV/JSON artifacts over 4 suites, byte-identical on rerun"
           + (f"; mismatched: {mismatched}" if mismatched else ""))
    assert ok
