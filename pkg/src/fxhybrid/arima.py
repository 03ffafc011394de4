"""ARIMA(p, d, q): differencing, least-squares / CSS estimation and forecasting."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from . import kernels
from .errors import DataError, SingularDesignError

logger = logging.getLogger(__name__)

# Condition number above which the lagged design matrix is treated as singular.
SINGULAR_COND = 1e12


class NonStationaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ArimaOrder:
    p: int = 3
    d: int = 0
    q: int = 0

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise DataError("ARIMA orders must be non-negative")
        if self.p + self.q == 0 and self.d == 0:
            raise DataError("ARIMA(0,0,0) is not a model")

    @classmethod
    def coerce(cls, order) -> "ArimaOrder":
        return order if isinstance(order, cls) else cls(*order)


@dataclass(frozen=True, eq=False)
class ArimaModel:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    c: float
    sigma2: float
    last_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    last_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_obs: int = 0

    def __post_init__(self):
        object.__setattr__(self, "order", ArimaOrder.coerce(self.order))
        for name in ("phi", "theta", "last_values", "last_residuals"):
            a = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.phi.shape[0] != self.order.p or self.theta.shape[0] != self.order.q:
            raise DataError("coefficient lengths do not match the order")
        if self.sigma2 < 0:
            raise DataError("sigma2 must be non-negative")

    @property
    def mean(self) -> float:
        """Unconditional mean of the (differenced) stationary process."""
        return self.c / (1.0 - float(np.sum(self.phi)))

    def is_stationary(self) -> bool:
        return ar_is_stationary(self.phi)

    def to_dict(self) -> dict:
        o = self.order
        return {
            "order": [o.p, o.d, o.q],
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "c": self.c,
            "sigma2": self.sigma2,
            "last_values": self.last_values.tolist(),
            "last_residuals": self.last_residuals.tolist(),
            "n_obs": self.n_obs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArimaModel":
        return cls(ArimaOrder(*d["order"]), d["phi"], d["theta"], d["c"], d["sigma2"],
                   d.get("last_values", []), d.get("last_residuals", []), d.get("n_obs", 0))


def ar_is_stationary(phi) -> bool:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.size == 0:
        return True
    # roots of 1 - phi_1 z - ... - phi_p z^p, highest power first for np.roots
    poly = np.concatenate((-phi[::-1], [1.0]))
    return bool(np.all(np.abs(np.roots(poly)) > 1.0))


def difference(series, d: int = 1) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise DataError("d must be >= 0")
    if x.shape[0] <= d:
        raise DataError(f"series of length {x.shape[0]} cannot be differenced {d} times")
    return np.diff(x, n=d) if d else x.copy()


def undifference(diffed, seed_values, d: int = 1) -> np.ndarray:
    """Invert :func:`difference` given the first ``d`` values of the original series."""
    seed = np.asarray(seed_values, dtype=np.float64).reshape(-1)
    if seed.shape[0] != d:
        raise DataError(f"need {d} seed values, got {seed.shape[0]}")
    x = np.asarray(diffed, dtype=np.float64)
    # starting value of each intermediate differencing level
    starts = [np.diff(seed, n=k)[0] for k in range(d)]
    for k in reversed(range(d)):
        x = np.concatenate(([starts[k]], starts[k] + np.cumsum(x)))
    return x if d else x.copy()


def _lag_matrix(r: np.ndarray, p: int, constant: bool) -> np.ndarray:
    n = r.shape[0]
    cols = [r[p - i - 1 : n - i - 1] for i in range(p)]
    if constant:
        cols.insert(0, np.ones(n - p))
    return np.column_stack(cols) if cols else np.zeros((n - p, 0))


def _ols(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Normal equations, falling back to QR when the design is poorly conditioned."""
    if design.shape[1] == 0:
        return np.zeros(0)
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularDesignError("singular lagged design matrix (constant series?)")
    if cond < 1e4:
        return np.linalg.solve(design.T @ design, design.T @ target)
    q, r = np.linalg.qr(design)
    return np.linalg.solve(r, q.T @ target)


def _css_residuals(params, r, p, q, constant):
    c = params[0] if constant else 0.0
    off = 1 if constant else 0
    return kernels.arma_residuals(r, c, params[off : off + p], params[off + p : off + p + q])


def fit(series, order=(3, 0, 0), include_constant: bool = True,
        method: Optional[str] = None) -> ArimaModel:
    """Estimate an ARIMA model.

    Pure AR (``q == 0``) uses ordinary least squares on the lagged regression;
    ``q > 0`` minimises the conditional sum of squares with innovations before
    ``p`` seeded at zero. ``method="css"`` forces CSS for pure AR as well.
    """
    order = ArimaOrder.coerce(order)
    p, d, q = order.p, order.d, order.q
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise DataError("series must be a finite 1-D vector")
    if x.shape[0] < p + q + d + 2:
        raise DataError(f"series of length {x.shape[0]} too short for ARIMA{(p, d, q)}")
    r = difference(x, d)
    if method is None:
        method = "ols" if q == 0 else "css"

    design = _lag_matrix(r, p, include_constant)
    if p > 0 or include_constant:
        beta = _ols(design, r[p:])
    else:
        beta = np.zeros(0)
    if method == "css":
        theta0 = np.zeros(q)
        start = np.concatenate((beta, theta0))
        sol = least_squares(
            _css_residuals, start, args=(r, p, q, include_constant),
            method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14,
        )
        beta = sol.x
    elif method != "ols":
        raise DataError(f"unknown estimation method {method!r}")

    off = 1 if include_constant else 0
    c = float(beta[0]) if include_constant else 0.0
    phi = beta[off : off + p]
    theta = beta[off + p : off + p + q] if method == "css" else np.zeros(q)
    resid = kernels.arma_residuals(r, c, phi, theta)[p:]
    sigma2 = float(np.mean(resid ** 2)) if resid.size else 0.0
    if not ar_is_stationary(phi):
        warnings.warn(f"fitted AR polynomial {phi} is not stationary", NonStationaryWarning, stacklevel=2)
    keep = p + d
    return ArimaModel(
        order, phi, theta, c, sigma2,
        last_values=x[len(x) - keep:] if keep else np.zeros(0),
        last_residuals=resid[len(resid) - q:] if q else np.zeros(0),
        n_obs=int(x.shape[0]),
    )


def _forecast_differenced(model: ArimaModel, r_tail: np.ndarray, steps: int) -> np.ndarray:
    p, q = model.order.p, model.order.q
    hist = list(r_tail[len(r_tail) - p:]) if p else []
    eps = list(model.last_residuals)
    out = np.empty(steps)
    for h in range(steps):
        val = model.c
        for i in range(p):
            val += model.phi[i] * hist[-1 - i]
        for j in range(q):
            # only innovations already observed contribute; future ones are 0
            k = j - h
            if k >= 0 and k < len(eps):
                val += model.theta[j] * eps[-1 - k]
        out[h] = val
        if p:
            hist.append(val)
    return out


def forecast(model: ArimaModel, steps: int = 1) -> np.ndarray:
    """Expected values ``steps`` ahead with future innovations set to zero."""
    if steps < 1:
        raise DataError("steps must be >= 1")
    d = model.order.d
    levels = [np.asarray(model.last_values, dtype=np.float64)]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    path = _forecast_differenced(model, levels[-1], steps)
    for k in reversed(range(d)):
        path = levels[k][-1] + np.cumsum(path)
    return path


def update(model: ArimaModel, observed: float) -> ArimaModel:
    """New model state after observing the next value; coefficients unchanged."""
    pred = forecast(model, 1)[0]
    keep = model.order.p + model.order.d
    values = np.append(model.last_values, observed)
    values = values[len(values) - keep:] if keep else np.zeros(0)
    resid = model.last_residuals
    if model.order.q:
        resid = np.append(resid, observed - pred)[-model.order.q:]
    return replace(model, last_values=values, last_residuals=resid, n_obs=model.n_obs + 1)


def rolling_forecast(model: ArimaModel, observations, horizon: int = 1,
                     refit_every: int = 0, history=None, include_constant: bool = True):
    """Walk forward through ``observations`` producing ``horizon``-step forecasts.

    Element ``t`` of the result forecasts ``observations[t]`` using only
    observations before ``t - horizon + 1``. With ``refit_every > 0`` the
    coefficients are re-estimated on ``history`` plus everything observed so far
    every ``refit_every`` steps. Returns ``(forecasts, final_model)``.
    """
    obs = np.asarray(observations, dtype=np.float64)
    hist = list(np.asarray(history, dtype=np.float64)) if history is not None else []
    states = [model]  # states[k] has seen k observations
    preds = np.empty(obs.shape[0])
    current = model
    for t in range(obs.shape[0]):
        seen = t - horizon + 1
        if seen >= 0:
            preds[t] = forecast(states[seen], horizon)[-1]
        else:
            preds[t] = forecast(model, t + 1)[-1]
        current = update(current, obs[t])
        hist.append(obs[t])
        if refit_every and (t + 1) % refit_every == 0:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", NonStationaryWarning)
                    current = fit(hist, current.order, include_constant)
            except (SingularDesignError, DataError) as exc:
                logger.warning("refit skipped at step %d: %s", t + 1, exc)
        states.append(current)
    return preds, current
