"""Simple-RNN and LSTM cells, plus whole-sequence tape ops with BPTT backward."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DataError
from .tape import Tensor, _make, _sigmoid, as_tensor

GATES = ("f", "i", "o", "s")


@dataclass(frozen=True, eq=False)
class LstmParams:
    W_f: np.ndarray  # (hidden, hidden + input), acting on [h_prev; x]
    W_i: np.ndarray
    W_o: np.ndarray
    W_s: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_s: np.ndarray

    def __post_init__(self):
        m = self.b_f.shape[0]
        for g in GATES:
            W, b = getattr(self, f"W_{g}"), getattr(self, f"b_{g}")
            if W.ndim != 2 or W.shape[0] != m or W.shape[1] <= m or b.shape != (m,):
                raise DataError(f"inconsistent LSTM parameter shapes for gate {g}")
        if len({getattr(self, f'W_{g}').shape for g in GATES}) != 1:
            raise DataError("LSTM gate matrices differ in shape")

    @property
    def hidden(self) -> int:
        return self.b_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1] - self.hidden


@dataclass(frozen=True, eq=False)
class RnnParams:
    W_hh: np.ndarray  # (hidden, hidden)
    W_xh: np.ndarray  # (hidden, input)
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        m = self.W_hh.shape[0]
        if self.W_hh.shape != (m, m) or self.W_xh.shape[0] != m:
            raise DataError("inconsistent RNN parameter shapes")
        if self.bias is not None and self.bias.shape != (m,):
            raise DataError("RNN bias has the wrong length")


@dataclass(frozen=True, eq=False)
class DenseParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise DataError("inconsistent dense parameter shapes")
        if self.activation not in ("relu", "tanh", "identity"):
            raise DataError(f"unknown activation {self.activation!r}")


def sigmoid(z) -> np.ndarray:
    return _sigmoid(np.asarray(z, dtype=np.float64))


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise DataError("softmax of an empty vector")
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_lstm_inputs(params: LstmParams, h_prev, s_prev, x):
    if h_prev.shape[-1] != params.hidden or s_prev.shape[-1] != params.hidden:
        raise DataError("state width does not match the LSTM")
    if x.shape[-1] != params.input_dim:
        raise DataError(f"LSTM expects input width {params.input_dim}, got {x.shape[-1]}")


def lstm_step(params: LstmParams, h_prev, s_prev, x):
    """One LSTM update; works on single vectors or row-batches."""
    h_prev, s_prev, x = (np.asarray(v, dtype=np.float64) for v in (h_prev, s_prev, x))
    _check_lstm_inputs(params, h_prev, s_prev, x)
    u = np.concatenate([h_prev, x], axis=-1)
    f = sigmoid(u @ params.W_f.T + params.b_f)
    i = sigmoid(u @ params.W_i.T + params.b_i)
    o = sigmoid(u @ params.W_o.T + params.b_o)
    s = f * s_prev + i * np.tanh(u @ params.W_s.T + params.b_s)
    return o * np.tanh(s), s


def rnn_step(params: RnnParams, h_prev, x) -> np.ndarray:
    h_prev, x = np.asarray(h_prev, dtype=np.float64), np.asarray(x, dtype=np.float64)
    if h_prev.shape[-1] != params.W_hh.shape[0] or x.shape[-1] != params.W_xh.shape[1]:
        raise DataError("RNN input/state width mismatch")
    pre = h_prev @ params.W_hh.T + x @ params.W_xh.T
    if params.bias is not None:
        pre = pre + params.bias
    return np.tanh(pre)


def lstm_sequence(x, W_f, W_i, W_o, W_s, b_f, b_i, b_o, b_s, h0=None, s0=None) -> Tensor:
    """Run an LSTM over ``x`` (B, T, n); returns all hidden states (B, T, m).

    Gate matrices are stacked once so each step is a single matmul.
    """
    x = as_tensor(x)
    Ws = [as_tensor(w) for w in (W_f, W_i, W_o, W_s)]
    bs = [as_tensor(b) for b in (b_f, b_i, b_o, b_s)]
    xv = x.value
    B, T, n = xv.shape
    m = bs[0].value.shape[0]
    if Ws[0].value.shape != (m, m + n):
        raise DataError(f"LSTM expects input width {Ws[0].value.shape[1] - m}, got {n}")
    W = np.concatenate([w.value for w in Ws], axis=0)  # (4m, m+n)
    b = np.concatenate([v.value for v in bs])
    h0t = as_tensor(np.zeros((B, m)) if h0 is None else h0)
    s0t = as_tensor(np.zeros((B, m)) if s0 is None else s0)
    h, s = h0t.value, s0t.value
    H = np.empty((B, T, m))
    cache = []
    for t in range(T):
        u = np.concatenate([h, xv[:, t]], axis=1)
        z = u @ W.T + b
        gates = _sigmoid(z[:, :3 * m])
        f, i, o = gates[:, :m], gates[:, m:2 * m], gates[:, 2 * m:]
        g = np.tanh(z[:, 3 * m:])
        s_prev = s
        s = f * s_prev + i * g
        ts = np.tanh(s)
        h = o * ts
        H[:, t] = h
        cache.append((u, f, i, o, g, s_prev, ts))

    def backward(dH):
        dW = np.zeros_like(W)
        db = np.zeros_like(b)
        dx = np.empty_like(xv)
        dh_next = np.zeros((B, m))
        ds_next = np.zeros((B, m))
        for t in reversed(range(T)):
            u, f, i, o, g, s_prev, ts = cache[t]
            dh = dH[:, t] + dh_next
            ds = ds_next + dh * o * (1.0 - ts * ts)
            dz = np.concatenate([
                ds * s_prev * f * (1.0 - f),
                ds * g * i * (1.0 - i),
                dh * ts * o * (1.0 - o),
                ds * i * (1.0 - g * g),
            ], axis=1)
            dW += dz.T @ u
            db += dz.sum(axis=0)
            du = dz @ W
            dh_next = du[:, :m]
            dx[:, t] = du[:, m:]
            ds_next = ds * f
        gW = np.split(dW, 4, axis=0)
        gb = np.split(db, 4)
        return (dx, *gW, *gb, dh_next, ds_next)

    return _make(H, (x, *Ws, *bs, h0t, s0t), backward, "lstm_seq")


def rnn_sequence(x, W_hh, W_xh, bias=None, h0=None) -> Tensor:
    """Simple tanh RNN over ``x`` (B, T, n); returns all hidden states."""
    x, W_hh, W_xh = as_tensor(x), as_tensor(W_hh), as_tensor(W_xh)
    xv, Whh, Wxh = x.value, W_hh.value, W_xh.value
    B, T, n = xv.shape
    m = Whh.shape[0]
    if Wxh.shape != (m, n):
        raise DataError(f"RNN expects input width {Wxh.shape[1]}, got {n}")
    has_bias = bias is not None
    bt = as_tensor(bias if has_bias else np.zeros(m))
    h0t = as_tensor(np.zeros((B, m)) if h0 is None else h0)
    xproj = xv @ Wxh.T + bt.value  # (B, T, m)
    H = np.empty((B, T, m))
    h = h0t.value
    for t in range(T):
        h = np.tanh(h @ Whh.T + xproj[:, t])
        H[:, t] = h

    def backward(dH):
        dWhh = np.zeros_like(Whh)
        dpre_all = np.empty_like(H)
        dh_next = np.zeros((B, m))
        for t in reversed(range(T)):
            h_t = H[:, t]
            h_prev = H[:, t - 1] if t > 0 else h0t.value
            dpre = (dH[:, t] + dh_next) * (1.0 - h_t * h_t)
            dWhh += dpre.T @ h_prev
            dh_next = dpre @ Whh
            dpre_all[:, t] = dpre
        flat = dpre_all.reshape(-1, m)
        dWxh = flat.T @ xv.reshape(-1, n)
        dx = dpre_all @ Wxh
        db = flat.sum(axis=0) if has_bias else None
        return dx, dWhh, dWxh, db, dh_next

    return _make(H, (x, W_hh, W_xh, bt, h0t), backward, "rnn_seq")
