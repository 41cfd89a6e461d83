"""LSTM and bidirectional LSTM with backprop through time.

Gate layout: each gate matrix maps the concatenation [h_prev, x_t] of size
H + D to H units.  The candidate cell uses tanh, gates use the logistic
sigmoid, and the hidden state is o * tanh(c).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Layer, NnError, ShapeMismatch, glorot_uniform


class EmptySequence(NnError):
    pass


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    @property
    def hidden_size(self):
        return self.W_i.shape[0]

    @property
    def input_size(self):
        return self.W_i.shape[1] - self.W_i.shape[0]


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray


def init_lstm_params(input_size, hidden_size, rng) -> LstmParams:
    """Glorot init; forget-gate bias starts at 1 for early memory retention."""
    z = hidden_size + input_size

    def w():
        return glorot_uniform(rng, (hidden_size, z), z, hidden_size)

    return LstmParams(
        W_i=w(), W_f=w(), W_o=w(), W_c=w(),
        b_i=np.zeros(hidden_size),
        b_f=np.ones(hidden_size),
        b_o=np.zeros(hidden_size),
        b_c=np.zeros(hidden_size),
    )


def _step(params: LstmParams, h_prev, c_prev, x):
    z = np.concatenate([h_prev, x], axis=-1)
    i = sigmoid(z @ params.W_i.T + params.b_i)
    f = sigmoid(z @ params.W_f.T + params.b_f)
    o = sigmoid(z @ params.W_o.T + params.b_o)
    c_bar = np.tanh(z @ params.W_c.T + params.b_c)
    c = f * c_prev + i * c_bar
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (z, i, f, o, c_bar, c_prev, tanh_c)
    return h, c, cache


def lstm_step(params: LstmParams, state: LstmState, x) -> LstmState:
    """One recurrence update; works on single vectors or (batch, ...) arrays."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_size:
        raise ShapeMismatch(f"expected input size {params.input_size}, got {x.shape[-1]}")
    h, c, _ = _step(params, state.h, state.c, x)
    return LstmState(h=h, c=c)


def _step_backward(params: LstmParams, cache, dh, dc_next):
    z, i, f, o, c_bar, c_prev, tanh_c = cache
    hidden = params.hidden_size
    do = dh * tanh_c
    dc = dh * o * (1.0 - tanh_c**2) + dc_next
    di = dc * c_bar
    df = dc * c_prev
    dc_bar = dc * i
    dpre_i = di * i * (1.0 - i)
    dpre_f = df * f * (1.0 - f)
    dpre_o = do * o * (1.0 - o)
    dpre_c = dc_bar * (1.0 - c_bar**2)
    grads = {
        "W_i": dpre_i.T @ z, "b_i": dpre_i.sum(axis=0),
        "W_f": dpre_f.T @ z, "b_f": dpre_f.sum(axis=0),
        "W_o": dpre_o.T @ z, "b_o": dpre_o.sum(axis=0),
        "W_c": dpre_c.T @ z, "b_c": dpre_c.sum(axis=0),
    }
    dz = dpre_i @ params.W_i + dpre_f @ params.W_f \
        + dpre_o @ params.W_o + dpre_c @ params.W_c
    dh_prev = dz[:, :hidden]
    dx = dz[:, hidden:]
    dc_prev = dc * f
    return dh_prev, dc_prev, dx, grads


def _run_chain(params, xs, batch):
    """xs: list of (B, D) steps; returns per-step hidden states and caches."""
    hidden = params.hidden_size
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    hs, caches = [], []
    for x in xs:
        h, c, cache = _step(params, h, c, x)
        hs.append(h)
        caches.append(cache)
    return hs, caches


def _chain_backward(params, caches, dhs):
    """dhs: per-step upstream hidden-state gradients (same order as caches)."""
    batch, hidden = dhs[0].shape
    grads = {k: np.zeros_like(getattr(params, k))
             for k in ("W_i", "b_i", "W_f", "b_f", "W_o", "b_o", "W_c", "b_c")}
    dxs = [None] * len(caches)
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    for t in range(len(caches) - 1, -1, -1):
        dh_prev, dc, dx, step_grads = _step_backward(params, caches[t], dh + dhs[t], dc)
        for k, g in step_grads.items():
            grads[k] += g
        dxs[t] = dx
        dh = dh_prev
    return dxs, grads


def bilstm_forward(params_fwd: LstmParams, params_bwd: LstmParams, sequence) -> np.ndarray:
    """Functional bidirectional pass over one (T, D) sequence; output (T, 2H)
    concatenating the forward state at t with the backward state at t."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptySequence(f"need a non-empty (T, D) sequence, got shape {seq.shape}")
    xs = [seq[t][None, :] for t in range(seq.shape[0])]
    hs_fwd, _ = _run_chain(params_fwd, xs, batch=1)
    hs_bwd, _ = _run_chain(params_bwd, xs[::-1], batch=1)
    hs_bwd = hs_bwd[::-1]
    return np.concatenate(
        [np.concatenate([hf, hb], axis=1) for hf, hb in zip(hs_fwd, hs_bwd)], axis=0
    )


class Lstm(Layer):
    """Recurrent layer over channel-first (B, D, T) input.

    With return_sequences the output is (B, H, T); otherwise the final
    hidden state (B, H).
    """

    def __init__(self, units, return_sequences=False):
        super().__init__()
        self.units = units
        self.return_sequences = return_sequences

    def initialize(self, in_shape, rng):
        d, t = in_shape
        self.lstm_params = init_lstm_params(d, self.units, rng)
        self._sync_params()
        self.steps = t
        return (self.units, t) if self.return_sequences else (self.units,)

    def _sync_params(self):
        p = self.lstm_params
        self.params = {k: getattr(p, k)
                       for k in ("W_i", "b_i", "W_f", "b_f", "W_o", "b_o", "W_c", "b_c")}

    def forward(self, x, train=False):
        b, d, t = x.shape
        # params dict entries may have been swapped by the optimizer-facing API
        for k in self.params:
            setattr(self.lstm_params, k, self.params[k])
        xs = [x[:, :, i] for i in range(t)]
        hs, self._caches = _run_chain(self.lstm_params, xs, b)
        self._batch = b
        if self.return_sequences:
            return np.stack(hs, axis=2)
        return hs[-1]

    def backward(self, dout):
        t = len(self._caches)
        hidden = self.units
        if self.return_sequences:
            dhs = [dout[:, :, i] for i in range(t)]
        else:
            dhs = [np.zeros((self._batch, hidden)) for _ in range(t - 1)] + [dout]
        dxs, self.grads = _chain_backward(self.lstm_params, self._caches, dhs)
        return np.stack(dxs, axis=2)


class BiLstm(Layer):
    """Bidirectional recurrent layer over (B, D, T); output width is 2H."""

    def __init__(self, units, return_sequences=False):
        super().__init__()
        self.units = units
        self.return_sequences = return_sequences

    def initialize(self, in_shape, rng):
        d, t = in_shape
        self.fwd = init_lstm_params(d, self.units, rng)
        self.bwd = init_lstm_params(d, self.units, rng)
        keys = ("W_i", "b_i", "W_f", "b_f", "W_o", "b_o", "W_c", "b_c")
        self.params = {f"fwd_{k}": getattr(self.fwd, k) for k in keys}
        self.params.update({f"bwd_{k}": getattr(self.bwd, k) for k in keys})
        self.steps = t
        return (2 * self.units, t) if self.return_sequences else (2 * self.units,)

    def forward(self, x, train=False):
        b, d, t = x.shape
        for k, v in self.params.items():
            side, name = k.split("_", 1)
            setattr(self.fwd if side == "fwd" else self.bwd, name, v)
        xs = [x[:, :, i] for i in range(t)]
        hs_f, self._caches_f = _run_chain(self.fwd, xs, b)
        hs_b, self._caches_b = _run_chain(self.bwd, xs[::-1], b)
        hs_b = hs_b[::-1]
        self._batch = b
        if self.return_sequences:
            return np.concatenate([np.stack(hs_f, axis=2), np.stack(hs_b, axis=2)], axis=1)
        return np.concatenate([hs_f[-1], hs_b[0]], axis=1)

    def backward(self, dout):
        t = len(self._caches_f)
        h = self.units
        zero = lambda: np.zeros((self._batch, h))
        if self.return_sequences:
            dhs_f = [dout[:, :h, i] for i in range(t)]
            dhs_b = [dout[:, h:, i] for i in range(t)]
        else:
            dhs_f = [zero() for _ in range(t - 1)] + [dout[:, :h]]
            dhs_b = [dout[:, h:]] + [zero() for _ in range(t - 1)]
        dxs_f, grads_f = _chain_backward(self.fwd, self._caches_f, dhs_f)
        dxs_b_rev, grads_b = _chain_backward(self.bwd, self._caches_b, dhs_b[::-1])
        dxs_b = dxs_b_rev[::-1]
        self.grads = {f"fwd_{k}": v for k, v in grads_f.items()}
        self.grads.update({f"bwd_{k}": v for k, v in grads_b.items()})
        return np.stack(dxs_f, axis=2) + np.stack(dxs_b, axis=2)
