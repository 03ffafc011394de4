"""Forecast error metrics and the residual/combination algebra of the hybrid model."""
from __future__ import annotations

import numpy as np

from .errors import DataError


def _pair(y_hat, y, min_len: int = 1):
    a = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    b = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape[0]} predictions vs {b.shape[0]} targets")
    if a.shape[0] < min_len:
        raise DataError(f"need at least {min_len} values, got {a.shape[0]}")
    return a, b


def residual_series(y, y_hat_arnn) -> np.ndarray:
    """``R_t = y_t - yhat_t``."""
    yh, yy = _pair(y_hat_arnn, y, 0)
    return yy - yh


def combine(y_hat_arnn, r_hat) -> np.ndarray:
    """Hybrid forecast ``yhat_t + Rhat_t``."""
    a, r = _pair(y_hat_arnn, r_hat, 0)
    return a + r


def rmse(y_hat, y) -> float:
    a, b = _pair(y_hat, y)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mape(y_hat, y) -> float:
    """Mean absolute percentage error, in percent."""
    a, b = _pair(y_hat, y)
    if np.any(b == 0):
        raise DataError("MAPE is undefined when a true value is 0")
    return float(np.mean(np.abs((a - b) / b)) * 100.0)


def directional_accuracy(y_hat, y) -> float:
    """Share of the N-1 steps where ``(y[t+1]-y[t]) * (yhat[t+1]-y[t]) >= 0``."""
    a, b = _pair(y_hat, y, 2)
    hits = (b[1:] - b[:-1]) * (a[1:] - b[:-1]) >= 0
    return float(np.mean(hits))


def all_metrics(y_hat, y) -> dict:
    out = {"rmse": rmse(y_hat, y), "da": directional_accuracy(y_hat, y)}
    try:
        out["mape_percent"] = mape(y_hat, y)
    except DataError:
        out["mape_percent"] = None
    return out
