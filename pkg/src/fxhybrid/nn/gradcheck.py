"""Central finite-difference check of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import NumericError
from .tape import GradientTape, Tensor


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst: tuple  # (tensor name, flat index)
    coords_checked: int
    resamples: int


class _KinkCrossed(Exception):
    pass


def _relu_masks(tape: GradientTape) -> list:
    return [n.parents[0].value > 0 for n in tape.nodes if n.op == "relu"]


def _eval(loss_fn, point: dict):
    with GradientTape() as tape:
        loss = float(loss_fn(point).value)
    return loss, _relu_masks(tape)


def _same(masks_a, masks_b) -> bool:
    return len(masks_a) == len(masks_b) and all(np.array_equal(a, b) for a, b in zip(masks_a, masks_b))


def _check_at(loss_fn, point: dict, h, coords_per_tensor, rng, kink_tol):
    leaves = {k: Tensor(v.copy(), name=k) for k, v in point.items()}
    with GradientTape() as tape:
        loss = loss_fn(leaves)
    if not np.isfinite(loss.value).all():
        raise NumericError("loss is not finite at the check point")
    if kink_tol > 0:
        margins = [np.min(np.abs(n.parents[0].value)) for n in tape.nodes
                   if n.op == "relu" and n.parents[0].value.size]
        if margins and min(margins) < kink_tol:
            raise _KinkCrossed
    base_masks = _relu_masks(tape)
    names = list(leaves)
    grads = dict(zip(names, tape.gradient(loss, [leaves[k] for k in names])))

    worst_err, worst, checked = 0.0, ("", -1), 0
    for k in names:
        flat = point[k].reshape(-1)
        size = flat.size
        idx = np.arange(size) if size <= coords_per_tensor else rng.choice(size, coords_per_tensor, replace=False)
        g_ad = grads[k].reshape(-1)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            lp, mp = _eval(loss_fn, point)
            flat[j] = orig - h
            lm, mm = _eval(loss_fn, point)
            flat[j] = orig
            if not (_same(mp, base_masks) and _same(mm, base_masks)):
                raise _KinkCrossed
            g_fd = (lp - lm) / (2.0 * h)
            err = abs(g_ad[j] - g_fd) / max(abs(g_ad[j]) + abs(g_fd), 1e-8)
            checked += 1
            if err > worst_err:
                worst_err, worst = err, (k, int(j))
    return worst_err, worst, checked


def gradient_check(loss_fn: Callable[[dict], Tensor], params: dict, h: float = 1e-5,
                   coords_per_tensor: int = 200, seed: int = 0, max_resample: int = 20,
                   resample_scale: float = 1e-3, kink_tol: float = 0.0) -> GradCheckResult:
    """Compare reverse-mode gradients of ``loss_fn`` with central differences.

    ``loss_fn`` maps a dict of leaf tensors (or plain arrays) to a scalar loss
    tensor. Up to ``coords_per_tensor`` coordinates per tensor are sampled
    (all of them for smaller tensors). If a perturbation ``+-h`` flips any
    ReLU, the difference straddles a kink; the whole point is then nudged by
    seeded noise of scale ``resample_scale`` and the check restarts.
    ``kink_tol > 0`` additionally rejects points where any ReLU input lies
    within ``kink_tol`` of zero (conservative, and slow to satisfy for wide
    networks near initialisation).
    """
    rng = np.random.default_rng(seed)
    point = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    for resamples in range(max_resample + 1):
        try:
            err, worst, checked = _check_at(loss_fn, point, h, coords_per_tensor, rng, kink_tol)
            return GradCheckResult(err, worst, checked, resamples)
        except _KinkCrossed:
            point = {k: v + resample_scale * rng.standard_normal(v.shape) for k, v in point.items()}
    raise NumericError("could not find a point away from ReLU kinks")
