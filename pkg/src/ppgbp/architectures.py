"""The five feature-extractor architectures.

Layer counts are fixed at 12 (cnn), 5 (lstm), 12 (bilstm), 9 (stft_cnn) and
11 (lstm_cnn).  Raw 2100-sample sequences are average-pooled by 10 before
any recurrent trunk to keep backprop through time tractable.
"""

from __future__ import annotations

from .nn import (
    Activation,
    AvgPool,
    BatchNorm,
    BiLstm,
    Conv1d,
    Dense,
    Dropout,
    GlobalAvgPool,
    Lstm,
    MaxPool,
    ModelSpec,
)

EXTRACTOR_NAMES = ("cnn", "lstm", "bilstm", "lstm_cnn", "stft_cnn")

# layer counts reported for the five stacks
LAYER_COUNTS = {"cnn": 12, "lstm": 5, "bilstm": 12, "lstm_cnn": 11, "stft_cnn": 9}

DROPOUT_RATE = 0.3
RECURRENT_DOWNSAMPLE = 10


def _cnn():
    return [
        Conv1d(32, 5, stride=2),
        BatchNorm(),
        Activation("relu"),
        MaxPool(2),
        Conv1d(64, 5, stride=2),
        BatchNorm(),
        Activation("relu"),
        MaxPool(2),
        GlobalAvgPool(),
        Dense(64, activation="relu"),
        Dropout(DROPOUT_RATE),
        Dense(2),
    ]


def _lstm():
    return [
        AvgPool(RECURRENT_DOWNSAMPLE),
        Lstm(64),
        Dropout(DROPOUT_RATE),
        Dense(32, activation="relu"),
        Dense(2),
    ]


def _bilstm():
    return [
        AvgPool(RECURRENT_DOWNSAMPLE),
        BiLstm(32, return_sequences=True),
        Dropout(DROPOUT_RATE),
        BiLstm(32),
        Dropout(DROPOUT_RATE),
        Dense(64, activation="relu"),
        Dropout(DROPOUT_RATE),
        Dense(32, activation="relu"),
        Dropout(DROPOUT_RATE),
        Dense(16, activation="relu"),
        Dropout(DROPOUT_RATE),
        Dense(2),
    ]


def _lstm_cnn():
    return [
        Conv1d(32, 5, stride=2),
        BatchNorm(),
        Activation("relu"),
        MaxPool(2),
        Conv1d(64, 5, stride=2),
        Activation("relu"),
        MaxPool(2),
        Lstm(64),
        Dropout(DROPOUT_RATE),
        Dense(32, activation="relu"),
        Dense(2),
    ]


def _stft_cnn():
    return [
        Conv1d(32, 3),
        BatchNorm(),
        Activation("relu"),
        Conv1d(32, 3),
        Activation("relu"),
        GlobalAvgPool(),
        Dense(32, activation="relu"),
        Dropout(DROPOUT_RATE),
        Dense(2),
    ]


_BUILDERS = {
    "cnn": _cnn,
    "lstm": _lstm,
    "bilstm": _bilstm,
    "lstm_cnn": _lstm_cnn,
    "stft_cnn": _stft_cnn,
}


def build_extractor(name: str) -> ModelSpec:
    """Fresh (un-initialized) model spec for one of the five extractors."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown extractor {name!r}; choose from {EXTRACTOR_NAMES}")
    layers = _BUILDERS[name]()
    assert len(layers) == LAYER_COUNTS[name]
    return ModelSpec(layers=layers, feature_tap=-2, name=name)
