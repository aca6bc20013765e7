"""Experiment configuration: a flat ``key = value`` text format with a typed schema.

Lines are ``key = value``; ``#`` starts a comment. Lists are comma
separated. Unknown keys and ill-typed values are rejected before any run.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import get_type_hints

from .channel import CellGeometry
from .data import DatasetSpec
from .fedtrain import AGGREGATORS, LR_SCHEDULES, PATHLOSS_MODES, TrainingConfig
from .precoding import PrecoderKind, PrecoderSpec

SUITES = ("train", "curves", "bounds", "oracle")
MODEL_KINDS = ("linear", "logistic", "mlp")
DATASET_KINDS = ("synthetic-classification", "synthetic-regression", "csv-file")


class ConfigError(ValueError):
    """Raised with one diagnostic per offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str = "train"
    seed: int = 0
    output_dir: str = "out"
    plot: bool = False

    # training
    rounds: int = 500
    base_lr: float = 1e-3
    lr_schedule: str = "constant"
    momentum: float = 0.9
    devices_total: int = 100
    devices_per_round: int = 10
    devices_per_resource: int = 5
    batch_size: int = 32
    model_kind: str = "logistic"
    hidden_units: int = 32
    aggregator: str = "bayaircomp"
    precoder: str = "sign_align"
    power_limit: float = 1.0
    truncation_threshold: float = 0.2
    noise_variance: float = 0.5
    noiseless: bool = False
    pathloss: str = "off"
    quantize_moments: bool = False
    moment_bits: int = 8
    estimate_convention: str = "average"

    # data
    dataset: str = "synthetic-classification"
    n_samples: int = 7500
    n_features: int = 20
    n_classes: int = 10
    class_sep: float = 3.5
    feature_scale: float = 10.0
    data_noise: float = 0.1
    csv_path: str = ""
    csv_label_column: str = "label"
    test_fraction: float = 0.2
    classes_per_device: int = 2

    # cell geometry
    cell_radius_km: float = 1.0
    carrier_mhz: float = 1800.0
    bs_height_m: float = 30.0
    ms_height_m: float = 1.5

    # curves suite
    curve_devices: int = 5
    curve_noise_variances: tuple[float, ...] = (2.0, 0.5, 0.1)
    curve_peak_gain: float = 5.0
    curve_y_max: float = 10.0
    curve_points: int = 2001

    # bounds suite
    bounds_devices: int = 5
    bounds_dim: int = 100
    bounds_trials: int = 10000
    inner_product_dim: int = 10
    inner_product_gains: tuple[float, ...] = (1.0, 0.5)
    inner_product_trials: int = 100000
    convergence_horizons: tuple[int, ...] = (100, 10000, 1000000)
    convergence_lr: float = 0.1
    convergence_smoothness: float = 1.0
    convergence_mse: float = 1.0
    convergence_loss_gap: float = 1.0

    # oracle suite
    oracle_configs: int = 100
    oracle_order: int = 64

    def validate(self) -> "ExperimentConfig":
        problems = []

        def choice(key, options):
            if getattr(self, key) not in options:
                problems.append(f"{key}: {getattr(self, key)!r} not in {list(options)}")

        choice("suite", SUITES)
        choice("model_kind", MODEL_KINDS)
        choice("aggregator", AGGREGATORS)
        choice("precoder", [k.value for k in PrecoderKind])
        choice("pathloss", PATHLOSS_MODES)
        choice("lr_schedule", LR_SCHEDULES)
        choice("estimate_convention", ("average", "sum"))
        choice("dataset", DATASET_KINDS)
        if self.dataset == "csv-file" and not self.csv_path:
            problems.append("csv_path: required for dataset csv-file")
        if not 0 < self.test_fraction < 1:
            problems.append("test_fraction: must be in (0, 1)")
        if not 1 <= self.hidden_units <= 64:
            problems.append("hidden_units: must be in [1, 64]")
        if self.curve_points < 2:
            problems.append("curve_points: must be >= 2")
        if any(v <= 0 for v in self.curve_noise_variances):
            problems.append("curve_noise_variances: must be positive")
        if self.bounds_trials < 1000:
            problems.append("bounds_trials: must be >= 1000")
        if not 32 <= self.oracle_order:
            problems.append("oracle_order: must be >= 32")
        for builder in (self.training, self.precoder_spec):
            try:
                builder()
            except ValueError as exc:
                problems.append(str(exc))
        if problems:
            raise ConfigError(problems)
        return self

    def precoder_spec(self) -> PrecoderSpec:
        return PrecoderSpec(self.precoder, self.power_limit, self.truncation_threshold)

    def training(self) -> TrainingConfig:
        return TrainingConfig(
            rounds=self.rounds, base_lr=self.base_lr, lr_schedule=self.lr_schedule,
            momentum=self.momentum, devices_total=self.devices_total,
            devices_per_round=self.devices_per_round,
            devices_per_resource=self.devices_per_resource, batch_size=self.batch_size,
            precoder=self.precoder_spec(), aggregator=self.aggregator,
            noise_variance=self.noise_variance, noiseless=self.noiseless,
            pathloss=self.pathloss, quantize_moments=self.quantize_moments,
            moment_bits=self.moment_bits, estimate_convention=self.estimate_convention)

    def dataset_spec(self, seed: int) -> DatasetSpec:
        return DatasetSpec(kind=self.dataset, n_samples=self.n_samples,
                           n_features=self.n_features, n_classes=self.n_classes,
                           noise=self.data_noise, class_sep=self.class_sep,
                           feature_scale=self.feature_scale, seed=seed,
                           path=self.csv_path or None, label_column=self.csv_label_column)

    def geometry_params(self) -> dict:
        return dict(carrier_mhz=self.carrier_mhz, bs_height_m=self.bs_height_m,
                    ms_height_m=self.ms_height_m)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {format_value(getattr(self, f.name))}\n" for f in fields(self))

    def digest(self) -> str:
        """Hash of everything that affects results; output location excluded."""
        text = "".join(line for line in self.to_text().splitlines(True)
                       if line.split(" = ", 1)[0] not in _NOT_HASHED)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_NOT_HASHED = ("output_dir", "plot")
_TYPES = get_type_hints(ExperimentConfig)
FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(text: str, kind):
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def parse_value(key: str, text: str):
    kind = _TYPES[key]
    text = text.strip()
    if getattr(kind, "__origin__", None) is tuple:
        item = kind.__args__[0]
        return tuple(_parse_scalar(t.strip(), item) for t in text.split(",") if t.strip())
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    return _parse_scalar(text, kind)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = parse_value(key, value)
        except ValueError as exc:
            problems.append(f"{source}:{lineno}: {key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file, then ``overrides``; validated."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), str(path)))
    for key, value in (overrides or {}).items():
        if key not in _TYPES:
            raise ConfigError([f"unknown key {key!r}"])
        values[key] = parse_value(key, value) if isinstance(value, str) else value
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError([str(exc)]) from None
    return cfg.validate()


def replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(cfg, **changes).validate()


def build_geometry(cfg: ExperimentConfig, rng) -> CellGeometry:
    return CellGeometry.uniform_disk(rng, cfg.devices_total, cfg.cell_radius_km,
                                     **cfg.geometry_params())
