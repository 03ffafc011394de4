"""Functional optimizers over name -> array parameter maps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError


@dataclass(frozen=True, eq=False)
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _check(params: dict, grads: dict) -> None:
    if params.keys() != grads.keys():
        raise DataError("parameter and gradient names differ")
    for k in params:
        if params[k].shape != grads[k].shape:
            raise DataError(f"gradient shape mismatch for {k}: {grads[k].shape} vs {params[k].shape}")


def adam_update(params: dict, grads: dict, state: AdamState, lr: float = 0.001,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam step. Returns ``(new_params, new_state)``."""
    _check(params, grads)
    t = state.step + 1
    new_p, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for k, p in params.items():
        g = grads[k]
        m = beta1 * state.m.get(k, 0.0) + (1.0 - beta1) * g
        v = beta2 * state.v.get(k, 0.0) + (1.0 - beta2) * (g * g)
        new_p[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k] = m
        new_v[k] = v
    return new_p, AdamState(t, new_m, new_v)


def sgd_update(params: dict, grads: dict, state=None, lr: float = 0.001, **_):
    _check(params, grads)
    return {k: p - lr * grads[k] for k, p in params.items()}, state
