"""Datasets: seeded synthetic generators, a CSV reader and label partitioning."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int | None = None  # None for regression targets

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.labels)
        if X.shape[0] != y.shape[0]:
            raise ValueError("features and labels differ in length")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def split(self, test_fraction: float, rng: np.random.Generator) -> tuple["Dataset", "Dataset"]:
        perm = rng.permutation(len(self))
        n_test = int(round(test_fraction * len(self)))
        return self.subset(np.sort(perm[n_test:])), self.subset(np.sort(perm[:n_test]))


@dataclass(frozen=True)
class DeviceDataset:
    """One device's shard: the examples it holds and the indices they came from."""

    data: Dataset
    indices: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def class_set(self) -> frozenset:
        return frozenset(np.unique(self.data.labels).tolist())


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "synthetic-classification"
    n_samples: int = 6000
    n_features: int = 20
    n_classes: int = 10
    noise: float = 0.1
    class_sep: float = 3.5
    feature_scale: float = 1.0
    seed: int = 0
    path: str | None = None
    label_column: str = "label"
    feature_columns: tuple[str, ...] | None = None


def synthetic_classification(n_samples, n_features, n_classes, class_sep, rng,
                             feature_scale=1.0) -> Dataset:
    """Gaussian blobs with balanced labels.

    Class means have norm about ``class_sep`` and the within-class noise is
    unit variance per coordinate; everything is then multiplied by
    ``feature_scale``.
    """
    means = rng.normal(0.0, class_sep / np.sqrt(n_features), size=(n_classes, n_features))
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    X = means[labels] + rng.standard_normal((n_samples, n_features))
    return Dataset(feature_scale * X, labels, n_classes)


def synthetic_regression(n_samples, n_features, noise, rng) -> Dataset:
    """Linear targets from a seeded ground-truth weight vector plus Gaussian noise."""
    w_star = rng.standard_normal(n_features)
    X = rng.standard_normal((n_samples, n_features))
    r = X @ w_star + noise * rng.standard_normal(n_samples)
    return Dataset(X, r, None)


def read_csv_dataset(path, label_column="label", feature_columns=None,
                     classification=True) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        wanted = [label_column] + list(feature_columns or [h for h in header if h != label_column])
        for col in wanted:
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r} in header")
        pos = [header.index(c) for c in wanted]
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(row[p]) for p in pos])
            except ValueError:
                raise ValueError(f"{path}:{reader.line_num}: non-numeric value") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    X, r = arr[:, 1:], arr[:, 0]
    if not classification:
        return Dataset(X, r, None)
    if np.any(r != np.round(r)) or np.any(r < 0):
        raise ValueError(f"{path}: class labels must be nonnegative integers")
    labels = r.astype(int)
    return Dataset(X, labels, int(labels.max()) + 1)


def load_dataset(spec: DatasetSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "synthetic-classification":
        return synthetic_classification(spec.n_samples, spec.n_features, spec.n_classes,
                                        spec.class_sep, rng, spec.feature_scale)
    if spec.kind == "synthetic-regression":
        return synthetic_regression(spec.n_samples, spec.n_features, spec.noise, rng)
    if spec.kind == "csv-file":
        if not spec.path:
            raise ValueError("csv-file dataset needs a path")
        return read_csv_dataset(spec.path, spec.label_column, spec.feature_columns)
    raise ValueError(f"unknown dataset kind {spec.kind!r}")


def partition_heterogeneous(dataset: Dataset, num_devices: int, classes_per_device: int,
                            rng: np.random.Generator) -> list[DeviceDataset]:
    """Split a labeled dataset into label-skewed, disjoint device shards.

    Each class is cut into class-pure shards, shards are laid out sorted by
    class, and device i takes shards i, i + K, i + 2K, ... With at most K
    shards per class this gives every device distinct classes, hence at most
    ``classes_per_device`` labels. Class order and device order are shuffled.
    """
    if dataset.num_classes is None:
        raise ValueError("label partition needs a classification dataset")
    classes = np.unique(dataset.labels)
    n_cls = classes.size
    if classes_per_device < 1 or classes_per_device > n_cls:
        raise ValueError(f"cannot give {classes_per_device} classes per device with {n_cls} classes")
    total_shards = num_devices * classes_per_device
    per_class = np.full(n_cls, total_shards // n_cls)
    per_class[: total_shards % n_cls] += 1
    if per_class.max() > num_devices:
        raise ValueError("impossible assignment: too many shards per class")

    shards = []
    for c, count in zip(rng.permutation(classes), per_class):
        idx = rng.permutation(np.flatnonzero(dataset.labels == c))
        if idx.size < count:
            raise ValueError(f"class {c} has {idx.size} examples for {count} shards")
        shards.extend(np.array_split(idx, count))

    order = rng.permutation(num_devices)
    devices = []
    for i in order:
        idx = np.sort(np.concatenate(shards[i::num_devices]))
        devices.append(DeviceDataset(dataset.subset(idx), idx))
    return devices


def partition_iid(dataset: Dataset, num_devices: int, rng: np.random.Generator) -> list[DeviceDataset]:
    perm = rng.permutation(len(dataset))
    return [DeviceDataset(dataset.subset(np.sort(p)), np.sort(p))
            for p in np.array_split(perm, num_devices)]
