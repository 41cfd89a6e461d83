"""Feed-forward layers with hand-written backward passes.

Shape conventions: dense activations are (batch, features); convolutional
activations are channel-first (batch, channels, length).  All arithmetic is
float64.  Each layer owns its parameters and the gradients of the last
backward pass.
"""

from __future__ import annotations

import math

import numpy as np


class NnError(Exception):
    pass


class ShapeMismatch(NnError):
    pass


class KernelExceedsInput(NnError):
    pass


class WindowTooLarge(NnError):
    pass


class BatchTooSmall(NnError):
    pass


def conv_output_len(n_in: int, p: int, k: int, s: int) -> int:
    """Output feature count of a strided 1D convolution (ceiling convention)."""
    if s < 1:
        raise ValueError(f"stride must be >= 1, got {s}")
    if k > n_in + 2 * p:
        raise KernelExceedsInput(f"kernel {k} exceeds padded input {n_in + 2 * p}")
    return math.ceil((n_in + 2 * p - k) / s) + 1


def dense_param_count(m: int, n: int) -> int:
    """Trainable parameters of a fully connected layer: weights plus biases."""
    if m < 1 or n < 1:
        raise ValueError("sizes must be >= 1")
    return m * n + n


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: initialize(in_shape, rng) -> out_shape, then forward/backward."""

    def __init__(self):
        self.params = {}
        self.grads = {}

    def initialize(self, in_shape, rng):
        return in_shape

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def param_items(self):
        return sorted(self.params.items())


class Dense(Layer):
    def __init__(self, units, activation=None):
        super().__init__()
        if activation not in (None, "relu"):
            raise ValueError(f"unsupported dense activation {activation!r}")
        self.units = units
        self.activation = activation

    def initialize(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ShapeMismatch(f"Dense expects flat input, got shape {in_shape}")
        m = in_shape[0]
        self.params = {
            "W": glorot_uniform(rng, (m, self.units), m, self.units),
            "b": np.zeros(self.units),
        }
        self.grads = {}
        return (self.units,)

    def forward(self, x, train=False):
        self._x = x
        z = x @ self.params["W"] + self.params["b"]
        if self.activation == "relu":
            self._z = z
            return np.maximum(z, 0.0)
        return z

    def backward(self, dout):
        if self.activation == "relu":
            dout = dout * (self._z > 0)
        self.grads = {"W": self._x.T @ dout, "b": dout.sum(axis=0)}
        return dout @ self.params["W"].T


class Activation(Layer):
    def __init__(self, kind="relu"):
        super().__init__()
        if kind not in ("relu", "tanh"):
            raise ValueError(f"unsupported activation {kind!r}")
        self.kind = kind

    def forward(self, x, train=False):
        if self.kind == "relu":
            self._mask = x > 0
            return np.maximum(x, 0.0)
        self._out = np.tanh(x)
        return self._out

    def backward(self, dout):
        if self.kind == "relu":
            return dout * self._mask
        return dout * (1.0 - self._out**2)


class Conv1d(Layer):
    """Strided cross-correlation over the time axis.

    The realized output length follows the ceiling formula, so when the
    stride does not evenly divide, the input is zero-padded on the right to
    complete the final window.
    """

    def __init__(self, filters, kernel, stride=1, padding=0):
        super().__init__()
        self.filters = filters
        self.kernel = kernel
        self.stride = stride
        self.padding = padding

    def initialize(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ShapeMismatch(f"Conv1d expects (channels, length), got {in_shape}")
        c_in, n_in = in_shape
        self.c_in = c_in
        self.n_out = conv_output_len(n_in, self.padding, self.kernel, self.stride)
        fan_in = c_in * self.kernel
        fan_out = self.filters * self.kernel
        self.params = {
            "W": glorot_uniform(rng, (self.filters, c_in, self.kernel), fan_in, fan_out),
            "b": np.zeros(self.filters),
        }
        self.grads = {}
        return (self.filters, self.n_out)

    def _pad(self, x):
        n_eff = x.shape[2] + 2 * self.padding
        extra = (self.n_out - 1) * self.stride + self.kernel - n_eff
        return np.pad(x, ((0, 0), (0, 0), (self.padding, self.padding + extra)))

    def forward(self, x, train=False):
        if x.shape[1] != self.c_in:
            raise ShapeMismatch(f"expected {self.c_in} input channels, got {x.shape[1]}")
        xp = self._pad(x)
        # (B, C, n_out, k) strided windows
        cols = np.lib.stride_tricks.sliding_window_view(xp, self.kernel, axis=2)[:, :, ::self.stride]
        b = x.shape[0]
        self._cols = cols
        self._x_shape = x.shape
        self._xp_len = xp.shape[2]
        flat = cols.transpose(0, 2, 1, 3).reshape(b, self.n_out, self.c_in * self.kernel)
        w = self.params["W"].reshape(self.filters, -1)
        out = flat @ w.T + self.params["b"]
        return out.transpose(0, 2, 1)  # (B, F, n_out)

    def backward(self, dout):
        b = dout.shape[0]
        d = dout.transpose(0, 2, 1)  # (B, n_out, F)
        flat = self._cols.transpose(0, 2, 1, 3).reshape(b, self.n_out, self.c_in * self.kernel)
        dw = np.einsum("bof,boc->fc", d, flat).reshape(self.params["W"].shape)
        db = d.sum(axis=(0, 1))
        dcols = (d @ self.params["W"].reshape(self.filters, -1))  # (B, n_out, C*k)
        dcols = dcols.reshape(b, self.n_out, self.c_in, self.kernel).transpose(0, 2, 1, 3)
        dxp = np.zeros((b, self.c_in, self._xp_len))
        for t in range(self.kernel):
            dxp[:, :, t : t + self.n_out * self.stride : self.stride] += dcols[:, :, :, t]
        self.grads = {"W": dw, "b": db}
        n_in = self._x_shape[2]
        return dxp[:, :, self.padding : self.padding + n_in]


class BatchNorm(Layer):
    """Per-feature (dense) or per-channel (conv) normalization with affine
    rescaling and running statistics for inference mode."""

    def __init__(self, momentum=0.9, eps=1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps

    def initialize(self, in_shape, rng):
        n = in_shape[0]
        self.params = {"gamma": np.ones(n), "beta": np.zeros(n)}
        self.grads = {}
        self.running_mean = np.zeros(n)
        self.running_var = np.ones(n)
        self._conv = len(in_shape) == 2
        return in_shape

    def _moments(self, x):
        axes = (0, 2) if self._conv else (0,)
        return x.mean(axis=axes), x.var(axis=axes), axes

    def _expand(self, v):
        return v[None, :, None] if self._conv else v[None, :]

    def forward(self, x, train=False):
        if train:
            if x.shape[0] < 2:
                raise BatchTooSmall("training-mode batch norm needs batch >= 2")
            mu, var, axes = self._moments(x)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mu
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mu, var = self.running_mean, self.running_var
            axes = (0, 2) if self._conv else (0,)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - self._expand(mu)) * self._expand(inv_std)
        self._xhat, self._inv_std, self._axes = xhat, inv_std, axes
        self._n = x.shape[0] * (x.shape[2] if self._conv else 1)
        return self._expand(self.params["gamma"]) * xhat + self._expand(self.params["beta"])

    def backward(self, dout):
        xhat, inv_std, axes, n = self._xhat, self._inv_std, self._axes, self._n
        self.grads = {
            "gamma": (dout * xhat).sum(axis=axes),
            "beta": dout.sum(axis=axes),
        }
        dxhat = dout * self._expand(self.params["gamma"])
        # batch-statistics backward (training mode); inference-mode backward
        # is not needed because gradients only flow in training
        term = dxhat - dxhat.mean(axis=axes, keepdims=True) \
            - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
        return term * self._expand(inv_std)


class MaxPool(Layer):
    def __init__(self, window, stride=None):
        super().__init__()
        self.window = window
        self.stride = stride if stride is not None else window

    def initialize(self, in_shape, rng):
        c, n = in_shape
        if self.window > n:
            raise WindowTooLarge(f"window {self.window} exceeds length {n}")
        self.n_out = (n - self.window) // self.stride + 1
        self._in_len = n
        return (c, self.n_out)

    def forward(self, x, train=False):
        wins = np.lib.stride_tricks.sliding_window_view(x, self.window, axis=2)[:, :, ::self.stride]
        self._argmax = wins.argmax(axis=3)
        self._shape = x.shape
        return wins.max(axis=3)

    def backward(self, dout):
        dx = np.zeros(self._shape)
        b, c, n_out = dout.shape
        starts = np.arange(n_out) * self.stride
        idx = starts[None, None, :] + self._argmax
        bi = np.arange(b)[:, None, None]
        ci = np.arange(c)[None, :, None]
        np.add.at(dx, (bi, ci, idx), dout)
        return dx


class AvgPool(Layer):
    """Non-overlapping-by-default average pooling; used to downsample raw
    sequences before recurrent layers."""

    def __init__(self, window, stride=None):
        super().__init__()
        self.window = window
        self.stride = stride if stride is not None else window

    def initialize(self, in_shape, rng):
        c, n = in_shape
        if self.window > n:
            raise WindowTooLarge(f"window {self.window} exceeds length {n}")
        self.n_out = (n - self.window) // self.stride + 1
        return (c, self.n_out)

    def forward(self, x, train=False):
        wins = np.lib.stride_tricks.sliding_window_view(x, self.window, axis=2)[:, :, ::self.stride]
        self._shape = x.shape
        return wins.mean(axis=3)

    def backward(self, dout):
        dx = np.zeros(self._shape)
        share = dout / self.window
        for t in range(self.window):
            dx[:, :, t : t + dout.shape[2] * self.stride : self.stride] += share
        return dx


class GlobalAvgPool(Layer):
    def initialize(self, in_shape, rng):
        self._len = in_shape[1]
        return (in_shape[0],)

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.mean(axis=2)

    def backward(self, dout):
        return np.repeat(dout[:, :, None], self._shape[2], axis=2) / self._shape[2]


class Dropout(Layer):
    """Inverted dropout; the mask from the last training forward is replayed
    exactly in backward.  Identity in inference mode."""

    def __init__(self, rate=0.3):
        super().__init__()
        self.rate = rate
        self.freeze_mask = False
        self._mask = None

    def initialize(self, in_shape, rng):
        self._rng = np.random.default_rng(int(rng.integers(2**63)))
        if not self.freeze_mask:
            self._mask = None
        return in_shape

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if not (self.freeze_mask and self._mask is not None):
            self._mask = (self._rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class Flatten(Layer):
    def initialize(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


def conv1d_forward(x, weights, bias, stride=1, padding=0):
    """Functional convolution used by oracle tests; x is (B, C, L)."""
    layer = Conv1d(filters=weights.shape[0], kernel=weights.shape[2],
                   stride=stride, padding=padding)
    layer.initialize(x.shape[1:], np.random.default_rng(0))
    layer.params["W"] = np.asarray(weights, dtype=np.float64)
    layer.params["b"] = np.asarray(bias, dtype=np.float64)
    return layer.forward(np.asarray(x, dtype=np.float64))


def pool_forward(x, kind, window=None, stride=None):
    """Functional pooling over (B, C, L) input."""
    if kind == "max":
        layer = MaxPool(window, stride)
    elif kind == "global_avg":
        layer = GlobalAvgPool()
    else:
        raise ValueError(f"unknown pooling kind {kind!r}")
    layer.initialize(x.shape[1:], np.random.default_rng(0))
    return layer.forward(np.asarray(x, dtype=np.float64))
