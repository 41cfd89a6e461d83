"""Training-loop contracts: convergence on separable data, determinism,
early stopping, serialization round-trips, and feature extraction."""

import numpy as np
import pytest

from ppgbp.architectures import LAYER_COUNTS, build_extractor
from ppgbp.nn import (
    Conv1d,
    Dense,
    Dropout,
    Lstm,
    ModelSpec,
    Sequential,
    TrainConfig,
    conv_output_len,
    dense_param_count,
    load_model,
    train,
)
from ppgbp.nn.model import DegenerateLabels


def sinusoid_dataset(n=80, length=120, seed=0):
    """Two classes of noisy sinusoids at well-separated frequencies."""
    rng = np.random.default_rng(seed)
    t = np.arange(length) / 100.0
    X = np.empty((n, 1, length))
    y = np.empty(n, dtype=int)
    for i in range(n):
        f = 2.0 if i % 2 == 0 else 8.0
        X[i, 0] = np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        X[i, 0] += 0.1 * rng.standard_normal(length)
        y[i] = i % 2
    return X, y


def small_spec():
    from ppgbp.nn import Flatten
    return ModelSpec(
        layers=[Conv1d(8, 5, stride=2), Flatten(), Dense(16, activation="relu"),
                Dropout(0.3), Dense(2)],
        feature_tap=-2, name="small")


class TestTrain:
    def test_separable_data_learns(self):
        X, y = sinusoid_dataset()
        model = train(small_spec(), X, y, TrainConfig(max_epochs=40, seed=0))
        acc = (model.predict(X) == y).mean()
        assert acc >= 0.99

    def test_same_seed_bit_identical(self):
        X, y = sinusoid_dataset()
        cfg = TrainConfig(max_epochs=5, seed=3)
        a = train(small_spec(), X, y, cfg)
        b = train(small_spec(), X, y, cfg)
        for pa, pb in zip(a.network.parameters(), b.network.parameters()):
            assert np.array_equal(pa, pb)

    def test_early_stopping_halts(self):
        X, y = sinusoid_dataset(n=40)
        cfg = TrainConfig(max_epochs=200, patience=5, seed=1)
        model = train(small_spec(), X, y, cfg)
        assert len(model.history) < 200

    def test_single_class_rejected(self):
        X, _ = sinusoid_dataset(n=20)
        with pytest.raises(DegenerateLabels):
            train(small_spec(), X, np.zeros(20, dtype=int), TrainConfig(max_epochs=2))

    def test_history_records_losses(self):
        X, y = sinusoid_dataset(n=40)
        model = train(small_spec(), X, y, TrainConfig(max_epochs=3, seed=0))
        for row in model.history:
            assert set(row) >= {"epoch", "train_loss", "val_loss"}
            assert np.isfinite(row["train_loss"])

    def test_provenance_tags_frozen(self):
        X, y = sinusoid_dataset(n=20)
        model = train(small_spec(), X, y, TrainConfig(max_epochs=2, seed=0),
                      tags=["a", "b", "c"])
        assert model.provenance == frozenset({"a", "b", "c"})


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        X, y = sinusoid_dataset(n=40)
        model = train(small_spec(), X, y, TrainConfig(max_epochs=3, seed=0))
        path = tmp_path / "model.json"
        model.save(path)
        loaded = load_model(path)
        for pa, pb in zip(model.network.parameters(), loaded.network.parameters()):
            assert np.array_equal(pa, pb)
        assert np.array_equal(model.predict_proba(X), loaded.predict_proba(X))

    def test_round_trip_with_batchnorm_running_stats(self, tmp_path):
        from ppgbp.nn import Activation, BatchNorm, GlobalAvgPool
        spec = ModelSpec(
            layers=[Conv1d(4, 5, stride=2), BatchNorm(), Activation("relu"),
                    GlobalAvgPool(), Dense(2)],
            feature_tap=-2, name="bn")
        X, y = sinusoid_dataset(n=40)
        model = train(spec, X, y, TrainConfig(max_epochs=3, seed=0))
        path = tmp_path / "model.json"
        model.save(path)
        loaded = load_model(path)
        assert np.array_equal(model.predict_proba(X), loaded.predict_proba(X))


class TestExtractFeatures:
    def test_width_matches_penultimate_layer(self):
        X, y = sinusoid_dataset(n=40)
        model = train(small_spec(), X, y, TrainConfig(max_epochs=2, seed=0))
        feats = model.extract_features(X)
        assert feats.shape == (40, 16)

    def test_deterministic_inference(self):
        X, y = sinusoid_dataset(n=20)
        model = train(small_spec(), X, y, TrainConfig(max_epochs=2, seed=0))
        assert np.array_equal(model.extract_features(X), model.extract_features(X))

    def test_linear_probe_consistency(self):
        from ppgbp.classifiers import svm_fit, svm_predict
        X, y = sinusoid_dataset(n=80)
        model = train(small_spec(), X, y, TrainConfig(max_epochs=40, seed=0))
        head_acc = (model.predict(X) == y).mean()
        feats = model.extract_features(X)
        svm = svm_fit(feats, 2 * y - 1, kernel="linear", C=10.0)
        probe_acc = (svm.predict(feats) == 2 * y - 1).mean()
        assert abs(probe_acc - head_acc) <= 0.05


class TestArchitectureShapeFormulas:
    names = ["cnn", "lstm", "bilstm", "lstm_cnn", "stft_cnn"]
    input_shapes = {
        "cnn": (1, 2100), "lstm": (1, 2100), "bilstm": (1, 2100),
        "lstm_cnn": (1, 2100), "stft_cnn": (129, 29),
    }

    def test_layer_counts(self):
        assert LAYER_COUNTS == {"cnn": 12, "lstm": 5, "bilstm": 12,
                                "lstm_cnn": 11, "stft_cnn": 9}
        for name in self.names:
            assert len(build_extractor(name).layers) == LAYER_COUNTS[name]

    def test_conv_lengths_match_formula(self):
        rng = np.random.default_rng(0)
        for name in self.names:
            shape = self.input_shapes[name]
            found_conv = name != "lstm" and name != "bilstm"
            for layer in build_extractor(name).layers:
                in_shape = shape
                shape = layer.initialize(in_shape, rng)
                if isinstance(layer, Conv1d):
                    expected = conv_output_len(in_shape[1], layer.padding,
                                               layer.kernel, layer.stride)
                    assert shape[1] == expected
            assert shape == (2,)
            if found_conv:
                assert any(isinstance(l, Conv1d)
                           for l in build_extractor(name).layers)

    def test_dense_param_counts_match_formula(self):
        for name in self.names:
            net = Sequential(build_extractor(name))
            net.initialize(self.input_shapes[name], np.random.default_rng(0))
            for layer in net.layers:
                if isinstance(layer, Dense):
                    realized = layer.params["W"].size + layer.params["b"].size
                    m = layer.params["W"].shape[0]
                    assert realized == dense_param_count(m, layer.units)

    def test_final_layer_two_classes(self):
        for name in self.names:
            net = Sequential(build_extractor(name))
            out_shape = net.initialize(self.input_shapes[name],
                                       np.random.default_rng(0))
            assert out_shape == (2,)

    def test_all_architectures_forward(self):
        rng = np.random.default_rng(0)
        for name in self.names:
            net = Sequential(build_extractor(name))
            net.initialize(self.input_shapes[name], rng)
            x = rng.standard_normal((2, *self.input_shapes[name]))
            out = net.forward(x, train=False)
            assert out.shape == (2, 2)
            assert np.all(np.isfinite(out))
