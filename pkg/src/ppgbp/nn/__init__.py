"""Minimal trainable neural-network engine (numpy, reverse-mode by hand).

Enough to express small 1D-conv / LSTM / BiLSTM classifiers over PPG
segments and tap penultimate-layer features for classical heads.
"""

from .layers import (
    Activation,
    AvgPool,
    BatchNorm,
    BatchTooSmall,
    Conv1d,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    KernelExceedsInput,
    MaxPool,
    NnError,
    ShapeMismatch,
    WindowTooLarge,
    conv1d_forward,
    conv_output_len,
    dense_param_count,
    pool_forward,
)
from .recurrent import (
    BiLstm,
    EmptySequence,
    Lstm,
    LstmParams,
    LstmState,
    bilstm_forward,
    init_lstm_params,
    lstm_step,
)
from .loss import softmax, softmax_cross_entropy
from .optim import Adam
from .model import (
    DegenerateLabels,
    ModelSpec,
    Sequential,
    TrainConfig,
    TrainedModel,
    load_model,
    train,
)

__all__ = [
    "Activation", "AvgPool", "BatchNorm", "BatchTooSmall", "Conv1d", "Dense",
    "Dropout", "Flatten", "GlobalAvgPool", "KernelExceedsInput", "MaxPool",
    "NnError", "ShapeMismatch", "WindowTooLarge", "conv1d_forward",
    "conv_output_len", "dense_param_count", "pool_forward",
    "BiLstm", "EmptySequence", "Lstm", "LstmParams", "LstmState",
    "bilstm_forward", "init_lstm_params", "lstm_step",
    "softmax", "softmax_cross_entropy", "Adam",
    "DegenerateLabels", "ModelSpec", "Sequential", "TrainConfig",
    "TrainedModel", "load_model", "train",
]
