"""Reverse-mode autodiff over numpy arrays.

Operations performed while a :class:`GradientTape` is active are recorded in
execution order; :meth:`GradientTape.gradient` replays them backwards. Outside
a tape the same functions simply evaluate (used for finite differences and
inference).
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NumericError

_ACTIVE: list["GradientTape"] = []


class Tensor:
    """A float64 array plus the bookkeeping needed to backpropagate into it."""

    __slots__ = ("value", "grad", "parents", "backward", "name", "op")

    def __init__(self, value, name: str = "", parents: Sequence["Tensor"] = (),
                 backward: Optional[Callable] = None, op: str = "leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)
        self.backward = backward
        self.name = name
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor({self.op}, shape={self.value.shape}{', ' + self.name if self.name else ''})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, op="const")


class GradientTape:
    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def record(self, node: Tensor) -> None:
        self.nodes.append(node)

    def gradient(self, loss: Tensor, sources: Sequence[Tensor]) -> list[np.ndarray]:
        """d(loss)/d(source) for each source; unreachable sources get zeros."""
        if loss.value.size != 1:
            raise ValueError("gradient needs a scalar loss")
        if not np.isfinite(loss.value).all():
            raise NumericError("non-finite loss")
        for node in self.nodes:
            node.grad = None
        for s in sources:
            s.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            if node.grad is None or node.backward is None:
                continue
            grads = node.backward(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or parent.op == "const":
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g
        return [s.grad if s.grad is not None else np.zeros_like(s.value) for s in sources]


def _make(value, parents, backward, op) -> Tensor:
    out = Tensor(value, parents=parents, backward=backward, op=op)
    if _ACTIVE:
        _ACTIVE[-1].record(out)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.value.shape, b.value.shape
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.value.shape, b.value.shape
    return _make(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    return _make(av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)), "mul")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.value > 0  # gradient at exactly 0 is 0
    return _make(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.value)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.value)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def identity(x) -> Tensor:
    return as_tensor(x)


ACTIVATIONS = {"relu": relu, "tanh": tanh, "identity": identity, "sigmoid": sigmoid}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows, unlike 1/(1+exp(-z)) for large negative z
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def dense(x, W, b) -> Tensor:
    """``x @ W.T + b`` over the last axis of ``x``; ``W`` is (out, in)."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    xv, Wv = x.value, W.value

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = xv.reshape(-1, xv.shape[-1])
        return g @ Wv, g2.T @ x2, g2.sum(axis=0)

    return _make(xv @ Wv.T + b.value, (x, W, b), backward, "dense")


def bmm(a, b) -> Tensor:
    """Batched matmul (B, i, k) @ (B, k, j)."""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    return _make(av @ bv, (a, b),
                 lambda g: (g @ bv.transpose(0, 2, 1), av.transpose(0, 2, 1) @ g), "bmm")


def transpose12(x) -> Tensor:
    x = as_tensor(x)
    return _make(x.value.transpose(0, 2, 1), (x,), lambda g: (g.transpose(0, 2, 1),), "transpose")


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (x,), backward, "softmax")


def getitem(x, key) -> Tensor:
    x = as_tensor(x)
    shape = x.value.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, key, g)
        return (out,)

    return _make(x.value[key], (x,), backward, "getitem")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.value.shape
    return _make(x.value.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def mse(pred, target) -> Tensor:
    """Mean squared error; ``target`` is a constant array broadcastable to ``pred``."""
    pred = as_tensor(pred)
    t = np.asarray(target, dtype=np.float64).reshape(pred.value.shape)
    diff = pred.value - t
    n = diff.size
    return _make(np.array(np.mean(diff * diff)), (pred,), lambda g: (g * 2.0 * diff / n,), "mse")


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    shape = x.value.shape
    return _make(np.array(x.value.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")
