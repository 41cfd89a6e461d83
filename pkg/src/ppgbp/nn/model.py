"""Sequential model container, training loop, and parameter serialization."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import (
    Activation,
    AvgPool,
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    MaxPool,
    NnError,
)
from .loss import softmax, softmax_cross_entropy
from .optim import Adam
from .recurrent import BiLstm, Lstm

FORMAT_VERSION = 1


class DegenerateLabels(NnError):
    pass


_LAYER_TYPES = {
    "dense": (Dense, ("units", "activation")),
    "activation": (Activation, ("kind",)),
    "conv1d": (Conv1d, ("filters", "kernel", "stride", "padding")),
    "batchnorm": (BatchNorm, ("momentum", "eps")),
    "maxpool": (MaxPool, ("window", "stride")),
    "avgpool": (AvgPool, ("window", "stride")),
    "globalavgpool": (GlobalAvgPool, ()),
    "dropout": (Dropout, ("rate",)),
    "flatten": (Flatten, ()),
    "lstm": (Lstm, ("units", "return_sequences")),
    "bilstm": (BiLstm, ("units", "return_sequences")),
}
_TYPE_NAMES = {cls: name for name, (cls, _) in _LAYER_TYPES.items()}


def _layer_config(layer):
    name = _TYPE_NAMES[type(layer)]
    _, attrs = _LAYER_TYPES[name]
    return {"type": name, **{a: getattr(layer, a) for a in attrs}}


def _layer_from_config(cfg):
    cfg = dict(cfg)
    cls, _ = _LAYER_TYPES[cfg.pop("type")]
    return cls(**cfg)


@dataclass
class ModelSpec:
    """Ordered layer stack plus the index of the feature-tap layer.

    feature_tap indexes the layer whose *output* is used as the extracted
    feature vector; by default the layer feeding the final dense head.
    """

    layers: list
    feature_tap: int = -2
    name: str = "model"


class Sequential:
    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.layers = spec.layers
        self.feature_tap = spec.feature_tap % len(spec.layers)
        self.input_shape = None

    def initialize(self, input_shape, rng):
        self.input_shape = tuple(input_shape)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.initialize(shape, rng)
        self.output_shape = shape
        return shape

    def forward(self, x, train=False):
        self._activations = [x]
        for layer in self.layers:
            x = layer.forward(x, train=train)
            self._activations.append(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self):
        return [arr for layer in self.layers for _, arr in layer.param_items()]

    def gradients(self):
        return [layer.grads[name] for layer in self.layers for name, _ in layer.param_items()]

    def predict_logits(self, x):
        return self.forward(x, train=False)

    def predict_proba(self, x):
        return softmax(self.predict_logits(x))

    def extract_features(self, x):
        """Penultimate activations with dropout off and batch norm in
        inference mode."""
        self.forward(x, train=False)
        feats = self._activations[self.feature_tap + 1]
        return feats.reshape(feats.shape[0], -1)

    def snapshot(self):
        state = [copy.deepcopy(layer.params) for layer in self.layers]
        stats = [
            (layer.running_mean.copy(), layer.running_var.copy())
            if isinstance(layer, BatchNorm) else None
            for layer in self.layers
        ]
        return state, stats

    def restore(self, snap):
        state, stats = snap
        for layer, params, stat in zip(self.layers, state, stats):
            for k in layer.params:
                layer.params[k][...] = params[k]
            if stat is not None:
                layer.running_mean[...] = stat[0]
                layer.running_var[...] = stat[1]


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    min_delta: float = 1e-4
    validation_fraction: float = 0.15
    seed: int = 0


@dataclass
class TrainedModel:
    network: Sequential
    config: TrainConfig
    history: list = field(default_factory=list)
    provenance: frozenset = frozenset()
    stopped_epoch: int = 0

    def predict_proba(self, X):
        return self.network.predict_proba(np.asarray(X, dtype=np.float64))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def extract_features(self, X):
        return self.network.extract_features(np.asarray(X, dtype=np.float64))

    def save(self, path):
        net = self.network
        payload = {
            "format_version": FORMAT_VERSION,
            "name": net.spec.name,
            "feature_tap": net.spec.feature_tap,
            "input_shape": list(net.input_shape),
            "layers": [_layer_config(layer) for layer in net.layers],
            "params": [
                {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                 for k, v in layer.params.items()}
                for layer in net.layers
            ],
            "running_stats": [
                {"mean": layer.running_mean.tolist(), "var": layer.running_var.tolist()}
                if isinstance(layer, BatchNorm) else None
                for layer in net.layers
            ],
        }
        Path(path).write_text(json.dumps(payload))


def load_model(path) -> TrainedModel:
    payload = json.loads(Path(path).read_text())
    if payload["format_version"] != FORMAT_VERSION:
        raise NnError(f"unsupported model format {payload['format_version']}")
    spec = ModelSpec(
        layers=[_layer_from_config(c) for c in payload["layers"]],
        feature_tap=payload["feature_tap"],
        name=payload["name"],
    )
    net = Sequential(spec)
    net.initialize(tuple(payload["input_shape"]), np.random.default_rng(0))
    for layer, params, stats in zip(net.layers, payload["params"], payload["running_stats"]):
        for k, entry in params.items():
            layer.params[k][...] = np.array(entry["data"]).reshape(entry["shape"])
        if stats is not None:
            layer.running_mean[...] = np.array(stats["mean"])
            layer.running_var[...] = np.array(stats["var"])
    return TrainedModel(network=net, config=TrainConfig())


def one_hot(labels, n_classes=2):
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def train(spec: ModelSpec, X, y, config: TrainConfig = TrainConfig(),
          tags=None) -> TrainedModel:
    """Mini-batch Adam training with a held-out validation split and early
    stopping on validation loss; returns parameters at the best epoch.

    `tags` records data provenance (e.g. subject ids) on the trained model
    so downstream evaluation can assert split hygiene.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateLabels(f"need >= 2 classes in training data, got {classes}")
    n = len(y)
    rng = np.random.default_rng(config.seed)

    net = Sequential(spec)
    net.initialize(X.shape[1:], rng)

    n_val = max(1, int(round(config.validation_fraction * n)))
    perm = rng.permutation(n)
    for _ in range(n):
        if len(np.unique(y[perm[n_val:]])) >= 2:
            break
        perm = np.roll(perm, 1)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    y_hot = one_hot(y)

    opt = Adam(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    best_val = np.inf
    best_snap = net.snapshot()
    best_epoch = 0
    stall = 0
    history = []

    for epoch in range(1, config.max_epochs + 1):
        order = tr_idx[rng.permutation(len(tr_idx))]
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            logits = net.forward(X[idx], train=True)
            loss, _, dlogits = softmax_cross_entropy(logits, y_hot[idx])
            net.backward(dlogits)
            opt.step(net.parameters(), net.gradients())
            total += loss * len(idx)
            count += len(idx)
        train_loss = total / count
        val_logits = net.forward(X[val_idx], train=False)
        val_loss, _, _ = softmax_cross_entropy(val_logits, y_hot[val_idx])
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val - config.min_delta:
            best_val = val_loss
            best_snap = net.snapshot()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break

    net.restore(best_snap)
    return TrainedModel(
        network=net,
        config=config,
        history=history,
        provenance=frozenset(tags) if tags is not None else frozenset(),
        stopped_epoch=best_epoch,
    )
