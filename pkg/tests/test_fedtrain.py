import inspect

import numpy as np
import pytest

from ota_signsgd import aggregation, seeding
from ota_signsgd.channel import CellGeometry
from ota_signsgd.data import (
    Dataset,
    DeviceDataset,
    partition_heterogeneous,
    partition_iid,
    synthetic_classification,
    synthetic_regression,
)
from ota_signsgd.fedtrain import (
    Federation,
    TrainingConfig,
    TrainState,
    global_update_gd,
    global_update_momentum,
    local_gradient,
    lr_schedule,
    run_round,
    train,
)
from ota_signsgd.models import LinearRegression, LogisticRegression, SmallMLP, build_model


def finite_difference(model, w, X, y, idx, eps=1e-6):
    out = []
    for i in idx:
        e = np.zeros_like(w)
        e[i] = eps
        out.append((model.loss(w + e, X, y) - model.loss(w - e, X, y)) / (2 * eps))
    return np.array(out)


def small_federation(K=20, seed=0, n=2000, d=5, C=4):
    rng = np.random.default_rng(seed)
    data = synthetic_classification(n, d, C, 3.0, rng)
    devices = partition_heterogeneous(data, K, 2, rng)
    geo = CellGeometry.uniform_disk(rng, K)
    return Federation(LogisticRegression(d, C), devices, geo, data, None)


def regression_federation(K=1, noise=0.0, n=200, d=4, seed=0):
    rng = np.random.default_rng(seed)
    data = synthetic_regression(n, d, noise, rng)
    devices = partition_iid(data, K, rng)
    return Federation(LinearRegression(d), devices, CellGeometry(np.full(K, 0.5)), data, None)


class TestModels:
    @pytest.mark.parametrize("model", [LinearRegression(6), LogisticRegression(6, 3), SmallMLP(6, 3, 8)])
    def test_gradient_matches_finite_differences(self, model, rng):
        X = rng.normal(size=(40, 6))
        y = rng.normal(size=40) if model.kind == "linear" else rng.integers(0, 3, 40)
        w = 0.3 * rng.normal(size=model.num_params)
        idx = rng.choice(model.num_params, size=min(20, model.num_params), replace=False)
        fd = finite_difference(model, w, X, y, idx)
        g = model.gradient(w, X, y)[idx]
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)

    def test_hand_derivative(self):
        m = LinearRegression(1)
        np.testing.assert_allclose(m.gradient(np.array([1.0]), np.array([[1.0]]), np.array([0.0])), [1.0])

    def test_full_batch_is_mean_of_per_example(self, rng):
        m = LinearRegression(5)
        X, r, w = rng.normal(size=(30, 5)), rng.normal(size=30), rng.normal(size=5)
        np.testing.assert_allclose(m.gradient(w, X, r), m.per_example_gradients(w, X, r).mean(0), atol=1e-12)

    def test_initialization(self, rng):
        assert np.all(LogisticRegression(3, 2).init(rng) == 0)
        w = SmallMLP(3, 2, 4).init(np.random.default_rng(1))
        np.testing.assert_array_equal(w, SmallMLP(3, 2, 4).init(np.random.default_rng(1)))
        assert np.any(w != 0)

    def test_build_model(self):
        assert build_model("mlp", 4, 3, 16).hidden == 16
        with pytest.raises(ValueError):
            build_model("logistic", 4, None)
        with pytest.raises(ValueError):
            build_model("cnn", 4, 3)
        with pytest.raises(ValueError):
            SmallMLP(4, 3, 65)


class TestUpdates:
    def test_gd_examples(self):
        np.testing.assert_allclose(global_update_gd([1, 1], [1, -1], 0.1), [0.9, 1.1])
        np.testing.assert_array_equal(global_update_gd([2.0, 3.0], [0, 0], 0.5), [2.0, 3.0])

    def test_gd_steps_commute(self):
        w, est = np.array([0.3, -1.2]), np.array([0.5, 2.0])
        two = global_update_gd(global_update_gd(w, est, 0.1), est, 0.2)
        np.testing.assert_allclose(two, global_update_gd(w, est, 0.3), atol=1e-15)

    def test_momentum_arithmetic(self):
        np.testing.assert_allclose(global_update_momentum([0.0], [1.0], [1.0], 0.1, 0.9), [-0.19])

    def test_momentum_degenerate_cases(self, rng):
        w, est, prev = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)
        np.testing.assert_array_equal(global_update_momentum(w, est, prev, 0.1, 0.0),
                                      global_update_gd(w, est, 0.1))
        np.testing.assert_array_equal(global_update_momentum(w, est, np.zeros(4), 0.1, 0.9),
                                      global_update_gd(w, est, 0.1))
        with pytest.raises(ValueError):
            global_update_momentum(w, est, prev, 0.1, 1.0)

    def test_lr_schedule(self):
        assert lr_schedule(0, 0.001) == 0.001
        assert lr_schedule(9, 0.001) == pytest.approx(0.0001)
        assert lr_schedule(9, 0.001, "constant") == 0.001
        with pytest.raises(ValueError):
            lr_schedule(-1, 0.1)

    @pytest.mark.parametrize("T", [1, 10, 1000])
    def test_harmonic_sum(self, T):
        total = sum(lr_schedule(t, 1.0) for t in range(T))
        assert total <= 1 + np.log(T)


class TestLocalGradient:
    def test_full_batch_when_batch_exceeds_shard(self, rng):
        fed = regression_federation(K=1)
        w = rng.normal(size=4)
        full = fed.model.gradient(w, fed.train.features, fed.train.labels)
        np.testing.assert_allclose(local_gradient(fed.model, w, fed.devices[0], 10_000, rng), full)
        np.testing.assert_allclose(local_gradient(fed.model, w, fed.devices[0], 8, None), full)

    def test_minibatch_is_deterministic(self):
        fed = regression_federation(K=1)
        w = np.ones(4)
        a = local_gradient(fed.model, w, fed.devices[0], 8, np.random.default_rng(3))
        b = local_gradient(fed.model, w, fed.devices[0], 8, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_empty_dataset(self):
        empty = Dataset(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(ValueError, match="empty"):
            local_gradient(LinearRegression(2), np.zeros(2), empty, 4, None)

    def test_non_finite_rejected(self):
        ds = Dataset(np.array([[np.inf, 1.0]]), np.array([0.0]))
        with pytest.raises(FloatingPointError):
            local_gradient(LinearRegression(2), np.ones(2), ds, 4, None)


class TestPartition:
    def test_two_classes_per_device(self):
        data = synthetic_classification(6000, 5, 10, 3.0, np.random.default_rng(1))
        devices = partition_heterogeneous(data, 100, 2, np.random.default_rng(2))
        assert len(devices) == 100
        assert all(len(d.class_set) <= 2 for d in devices)
        for d in devices:
            np.testing.assert_array_equal(data.labels[d.indices], d.data.labels)

    def test_disjoint_and_covering(self):
        data = synthetic_classification(3000, 5, 10, 3.0, np.random.default_rng(1))
        devices = partition_heterogeneous(data, 100, 2, np.random.default_rng(2))
        all_idx = np.concatenate([d.indices for d in devices])
        assert sum(len(d) for d in devices) == len(data)
        np.testing.assert_array_equal(np.sort(all_idx), np.arange(len(data)))

    def test_all_classes_gives_homogeneous_shards(self):
        data = synthetic_classification(2000, 3, 4, 3.0, np.random.default_rng(1))
        devices = partition_heterogeneous(data, 10, 4, np.random.default_rng(2))
        assert all(len(d.class_set) == 4 for d in devices)

    def test_class_too_small_for_its_shards(self):
        data = Dataset(np.zeros((12, 1)), np.array([0] * 11 + [1]), 2)
        with pytest.raises(ValueError, match="class"):
            partition_heterogeneous(data, 4, 2, np.random.default_rng(0))

    @pytest.mark.parametrize("K,cpd", [(100, 11), (100, 0)])
    def test_impossible_assignment(self, K, cpd):
        data = synthetic_classification(2000, 3, 10, 3.0, np.random.default_rng(1))
        with pytest.raises(ValueError):
            partition_heterogeneous(data, K, cpd, np.random.default_rng(2))

    def test_regression_data_rejected(self):
        data = synthetic_regression(100, 2, 0.1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            partition_heterogeneous(data, 10, 2, np.random.default_rng(0))


class TestTrainingConfig:
    @pytest.mark.parametrize("kwargs", [dict(rounds=0), dict(base_lr=0.0), dict(momentum=1.0),
                                        dict(devices_per_round=7), dict(devices_per_round=200),
                                        dict(aggregator="mean"), dict(pathloss="on"),
                                        dict(lr_schedule="cosine"), dict(estimate_convention="max")])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            TrainingConfig(**kwargs)


class TestRunRound:
    def test_two_receptions_per_round(self):
        fed = small_federation()
        cfg = TrainingConfig(devices_total=20, devices_per_round=10, devices_per_resource=5)
        w0 = np.zeros(fed.model.num_params)
        _, metrics, receptions = run_round(TrainState(w0, np.zeros_like(w0)), fed, cfg,
                                           np.random.default_rng(0))
        assert receptions == 2
        assert metrics.round == 0
        assert metrics.loss == pytest.approx(np.log(4))

    def test_exact_aggregator_skips_channel(self):
        fed = small_federation()
        cfg = TrainingConfig(devices_total=20, aggregator="exact")
        w0 = np.zeros(fed.model.num_params)
        _, metrics, receptions = run_round(TrainState(w0, w0.copy()), fed, cfg, np.random.default_rng(0))
        assert receptions == 0 and metrics.agg_mse == 0.0

    @pytest.mark.parametrize("aggregator", ["bayaircomp", "majority", "naive"])
    @pytest.mark.parametrize("pathloss", ["off", "relative", "raw"])
    def test_all_paths_finite(self, aggregator, pathloss):
        fed = small_federation()
        cfg = TrainingConfig(rounds=3, devices_total=20, aggregator=aggregator, pathloss=pathloss,
                             quantize_moments=True, momentum=0.5)
        _, history, final = train(fed, cfg, seed=1)
        assert len(history) == 3 and np.isfinite(final)
        assert all(m.agg_mse >= 0 and m.grad_norm_sq >= 0 for m in history)

    def test_truncated_inversion_path(self):
        fed = small_federation()
        cfg = TrainingConfig(rounds=3, devices_total=20, aggregator="majority",
                             precoder=__import__("ota_signsgd").PrecoderSpec("truncated_inversion"))
        assert np.isfinite(train(fed, cfg, seed=2)[2])

    def test_same_seed_same_metrics(self):
        cfg = TrainingConfig(rounds=5, devices_total=20)
        a = train(small_federation(), cfg, seed=4)[1]
        b = train(small_federation(), cfg, seed=4)[1]
        c = train(small_federation(), cfg, seed=5)[1]
        assert a == b
        assert a != c

    def test_non_finite_aborts_with_round_index(self):
        fed = regression_federation(K=10, d=4)
        cfg = TrainingConfig(rounds=50, base_lr=1e200, devices_total=10, aggregator="exact")
        with pytest.raises(FloatingPointError, match=r"at round [1-9]"):
            train(fed, cfg, seed=0)

    def test_single_device_noiseless_moves_against_gradient(self):
        fed = regression_federation(K=1)
        cfg = TrainingConfig(devices_total=1, devices_per_round=1, devices_per_resource=1,
                             batch_size=10_000, noiseless=True, noise_variance=1e-8, base_lr=1e-2)
        w = np.full(4, 3.0)
        new, _, _ = run_round(TrainState(w, np.zeros(4)), fed, cfg, np.random.default_rng(0))
        g = fed.model.gradient(w, fed.train.features, fed.train.labels)
        assert (new.weights - w) @ g < 0

    def test_loss_non_increasing_single_device_noiseless(self):
        fed = regression_federation(K=1)
        cfg = TrainingConfig(rounds=200, base_lr=1e-2, devices_total=1, devices_per_round=1,
                             devices_per_resource=1, batch_size=10_000, noiseless=True)
        _, history, final = train(fed, cfg, seed=0)
        losses = np.array([m.loss for m in history] + [final])
        assert np.all(np.diff(losses) <= 1e-12)
        assert losses[-1] < 0.5 * losses[0]

    def test_clean_regression_is_solvable(self):
        fed = regression_federation(K=1, noise=0.0, n=500, d=5)
        cfg = TrainingConfig(rounds=1000, base_lr=0.5, devices_total=1, devices_per_round=1,
                             devices_per_resource=1, batch_size=10_000, aggregator="exact")
        _, history, final = train(fed, cfg, seed=0)
        assert final < 1e-6

    def test_averaged_gradient_norm_decreases_with_horizon(self):
        fed = regression_federation(K=10, noise=0.1, n=1000, d=5)
        cfg = TrainingConfig(rounds=400, base_lr=0.5, lr_schedule="decay", devices_total=10,
                             devices_per_round=10, devices_per_resource=5, batch_size=10_000)
        history = train(fed, cfg, seed=0)[1]
        norms = np.array([m.grad_norm_sq for m in history])
        running = np.cumsum(norms) / np.arange(1, norms.size + 1)
        assert np.all(np.isfinite(running))
        assert running[399] < running[99] < running[9]


class TestInformationFlow:
    def test_aggregators_only_see_received_side_information(self):
        fields = {f for f in aggregation.AggregationContext.__dataclass_fields__}
        assert fields == {"magnitudes", "means", "stds", "noise_variance"}
        for fn in (aggregation.bayaircomp, aggregation.naive_mean, aggregation.majority_estimate):
            params = list(inspect.signature(fn).parameters)
            assert params[:2] == ["y", "ctx"]

    def test_keyed_streams_are_independent_of_creation_order(self):
        a = seeding.stream(7, seeding.ROUNDS, 3).random()
        seeding.stream(7, seeding.DATA).random()
        assert seeding.stream(7, seeding.ROUNDS, 3).random() == a
        assert seeding.stream(7, seeding.ROUNDS, 4).random() != a


class TestDeviceDataset:
    def test_class_set(self):
        ds = Dataset(np.zeros((3, 1)), np.array([1, 1, 4]), 5)
        assert DeviceDataset(ds, np.arange(3)).class_set == frozenset({1, 4})
