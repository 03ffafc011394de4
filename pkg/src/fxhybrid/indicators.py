"""Momentum and volatility indicators over OHLC arrays.

Every series function returns an array aligned with its input, NaN where the
lookback is not yet filled. Wilder smoothing and EMAs are seeded with the
simple mean of their first ``period`` defined inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _need(n: int, period: int, strict: bool = True) -> None:
    if period < 1:
        raise ConfigError("indicator periods must be >= 1")
    if (n <= period) if strict else (n < period):
        raise DataError(f"series of length {n} too short for period {period}")


def _smooth(x: np.ndarray, period: int, alpha: float) -> np.ndarray:
    valid = np.flatnonzero(~np.isnan(x))
    if valid.size == 0:
        return np.full_like(x, np.nan)
    first = int(valid[0])
    start = first + period - 1
    if start >= x.shape[0]:
        return np.full_like(x, np.nan)
    init = float(np.mean(x[first : start + 1]))
    return kernels.exp_smooth(x, alpha, start, init)


def ema(x, period: int) -> np.ndarray:
    return _smooth(_as_array(x), period, 2.0 / (period + 1))


def wilder(x, period: int) -> np.ndarray:
    return _smooth(_as_array(x), period, 1.0 / period)


def _positive_part(x: np.ndarray) -> np.ndarray:
    """max(x, 0) that keeps NaN entries NaN."""
    out = np.where(x > 0, x, 0.0)
    out[np.isnan(x)] = np.nan
    return out


def _rolling(x: np.ndarray, period: int) -> np.ndarray:
    """(n - period + 1, period) trailing windows."""
    return np.lib.stride_tricks.sliding_window_view(x, period)


def _pad_front(values: np.ndarray, n: int) -> np.ndarray:
    out = np.full(n, np.nan)
    out[n - values.shape[0]:] = values
    return out


def _safe_ratio(num, den, fill: float) -> np.ndarray:
    num, den = np.broadcast_arrays(num, den)
    out = np.full(num.shape, fill)
    ok = den != 0
    out[ok] = num[ok] / den[ok]
    out[np.isnan(num) | np.isnan(den)] = np.nan
    return out


def true_range(bar, prev_close: float) -> float:
    """Single-bar true range given the previous close."""
    return max(bar.high - bar.low, abs(bar.high - prev_close), abs(bar.low - prev_close))


def trange(high, low, close) -> np.ndarray:
    high, low, close = map(_as_array, (high, low, close))
    prev = np.concatenate(([np.nan], close[:-1]))
    tr = np.maximum.reduce([high - low, np.abs(high - prev), np.abs(low - prev)])
    tr[0] = np.nan
    return tr


def atr(high, low, close, period: int = 14) -> np.ndarray:
    _need(len(close), period)
    return wilder(trange(high, low, close), period)


def natr(high, low, close, period: int = 14) -> np.ndarray:
    return 100.0 * atr(high, low, close, period) / _as_array(close)


def rsi(close, period: int = 14) -> np.ndarray:
    """Wilder RSI. A window with no movement at all reads 50."""
    close = _as_array(close)
    _need(len(close), period)
    diff = np.concatenate(([np.nan], np.diff(close)))
    gain = wilder(_positive_part(diff), period)
    loss = wilder(_positive_part(-diff), period)
    return 100.0 * _safe_ratio(gain, gain + loss, 0.5)


def cmo(close, period: int = 14) -> np.ndarray:
    """Chande momentum oscillator over summed up/down moves."""
    close = _as_array(close)
    _need(len(close), period)
    diff = np.diff(close)
    up = _rolling(np.where(diff > 0, diff, 0.0), period).sum(axis=1)
    down = _rolling(np.where(diff < 0, -diff, 0.0), period).sum(axis=1)
    return _pad_front(100.0 * _safe_ratio(up - down, up + down, 0.0), len(close))


def momentum(close, period: int = 10) -> np.ndarray:
    close = _as_array(close)
    _need(len(close), period)
    out = np.full_like(close, np.nan)
    out[period:] = close[period:] - close[:-period]
    return out


def _hh_ll(high, low, period):
    return _rolling(_as_array(high), period).max(axis=1), _rolling(_as_array(low), period).min(axis=1)


def stochastic_k(high, low, close, period: int = 14) -> np.ndarray:
    """Fast %K; a flat window reads 50."""
    close = _as_array(close)
    _need(len(close), period, strict=False)
    hh, ll = _hh_ll(high, low, period)
    c = close[period - 1:]
    return _pad_front(100.0 * _safe_ratio(c - ll, hh - ll, 0.5), len(close))


def williams_r(high, low, close, period: int = 14) -> np.ndarray:
    """Williams %R in [-100, 0]; a flat window reads -50."""
    close = _as_array(close)
    _need(len(close), period, strict=False)
    hh, ll = _hh_ll(high, low, period)
    c = close[period - 1:]
    return _pad_front(-100.0 * _safe_ratio(hh - c, hh - ll, 0.5), len(close))


def bop(open_, high, low, close) -> np.ndarray:
    open_, high, low, close = map(_as_array, (open_, high, low, close))
    return _safe_ratio(close - open_, high - low, 0.0)


def cci(high, low, close, period: int = 20) -> np.ndarray:
    close = _as_array(close)
    _need(len(close), period, strict=False)
    tp = (_as_array(high) + _as_array(low) + close) / 3.0
    win = _rolling(tp, period)
    mean = win.mean(axis=1)
    mad = np.abs(win - mean[:, None]).mean(axis=1)
    return _pad_front(_safe_ratio(tp[period - 1:] - mean, 0.015 * mad, 0.0), len(close))


def apo(close, fast: int = 12, slow: int = 26) -> np.ndarray:
    _need(len(close), slow, strict=False)
    return ema(close, fast) - ema(close, slow)


def ppo(close, fast: int = 12, slow: int = 26) -> np.ndarray:
    _need(len(close), slow, strict=False)
    slow_ema = ema(close, slow)
    return 100.0 * _safe_ratio(ema(close, fast) - slow_ema, slow_ema, 0.0)


def macd(close, fast: int = 12, slow: int = 26, signal: int = 9):
    """(line, signal, histogram); the line is the feature column."""
    line = apo(close, fast, slow)
    sig = ema(line, signal)
    return line, sig, line - sig


def macd_line(close, fast: int = 12, slow: int = 26, signal: int = 9) -> np.ndarray:
    return macd(close, fast, slow, signal)[0]


def trix(close, period: int = 15) -> np.ndarray:
    """One-bar percent rate of change of a triple EMA."""
    close = _as_array(close)
    _need(len(close), 3 * period - 2)
    e3 = ema(ema(ema(close, period), period), period)
    out = np.full_like(close, np.nan)
    out[1:] = 100.0 * _safe_ratio(e3[1:] - e3[:-1], e3[:-1], 0.0)
    return out


def adx(high, low, close, period: int = 14) -> np.ndarray:
    high, low, close = map(_as_array, (high, low, close))
    _need(len(close), 2 * period - 1)
    up = np.concatenate(([np.nan], high[1:] - high[:-1]))
    down = np.concatenate(([np.nan], low[:-1] - low[1:]))
    plus_dm = np.where(up > down, _positive_part(up), 0.0)
    minus_dm = np.where(down > up, _positive_part(down), 0.0)
    plus_dm[0] = minus_dm[0] = np.nan
    tr = wilder(trange(high, low, close), period)
    pdi = 100.0 * _safe_ratio(wilder(plus_dm, period), tr, 0.0)
    mdi = 100.0 * _safe_ratio(wilder(minus_dm, period), tr, 0.0)
    dx = 100.0 * _safe_ratio(np.abs(pdi - mdi), pdi + mdi, 0.0)
    return wilder(dx, period)


def aroon_oscillator(high, low, period: int = 25) -> np.ndarray:
    """Aroon up minus Aroon down over ``period + 1`` bars; ties go to the latest bar."""
    high, low = _as_array(high), _as_array(low)
    _need(len(high), period)
    since_hi = np.argmax(_rolling(high, period + 1)[:, ::-1], axis=1)
    since_lo = np.argmin(_rolling(low, period + 1)[:, ::-1], axis=1)
    osc = 100.0 * (since_lo - since_hi) / period
    return _pad_front(osc.astype(np.float64), len(high))


# name -> (callable over an OHLC dict, default params)
_REGISTRY: dict[str, tuple[Callable, dict]] = {
    "adx": (lambda p, **k: adx(p["high"], p["low"], p["close"], **k), {"period": 14}),
    "apo": (lambda p, **k: apo(p["close"], **k), {"fast": 12, "slow": 26}),
    "aroonosc": (lambda p, **k: aroon_oscillator(p["high"], p["low"], **k), {"period": 25}),
    "bop": (lambda p, **k: bop(p["open"], p["high"], p["low"], p["close"]), {}),
    "cci": (lambda p, **k: cci(p["high"], p["low"], p["close"], **k), {"period": 20}),
    "cmo": (lambda p, **k: cmo(p["close"], **k), {"period": 14}),
    "ppo": (lambda p, **k: ppo(p["close"], **k), {"fast": 12, "slow": 26}),
    "macd": (lambda p, **k: macd_line(p["close"], **k), {"fast": 12, "slow": 26, "signal": 9}),
    "willr": (lambda p, **k: williams_r(p["high"], p["low"], p["close"], **k), {"period": 14}),
    "mom": (lambda p, **k: momentum(p["close"], **k), {"period": 10}),
    "rsi": (lambda p, **k: rsi(p["close"], **k), {"period": 14}),
    "stoch_k": (lambda p, **k: stochastic_k(p["high"], p["low"], p["close"], **k), {"period": 14}),
    "trix": (lambda p, **k: trix(p["close"], **k), {"period": 15}),
    "atr": (lambda p, **k: atr(p["high"], p["low"], p["close"], **k), {"period": 14}),
    "natr": (lambda p, **k: natr(p["high"], p["low"], p["close"], **k), {"period": 14}),
    "trange": (lambda p, **k: trange(p["high"], p["low"], p["close"]), {}),
}

FEATURE_ORDER = tuple(_REGISTRY)


@dataclass(frozen=True)
class IndicatorSpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _REGISTRY:
            raise ConfigError(f"unknown indicator {self.name!r}")
        defaults = _REGISTRY[self.name][1]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"{self.name}: unknown parameter(s) {sorted(unknown)}")
        for k, v in self.params.items():
            if v < 1:
                raise ConfigError(f"{self.name}.{k} must be >= 1")

    def resolved_params(self) -> dict:
        return {**_REGISTRY[self.name][1], **self.params}


def default_specs(overrides: Optional[dict] = None) -> list[IndicatorSpec]:
    """All registered indicators in column order; ``overrides`` maps name -> params."""
    overrides = overrides or {}
    unknown = set(overrides) - set(_REGISTRY)
    if unknown:
        raise ConfigError(f"unknown indicator(s) {sorted(unknown)}")
    return [IndicatorSpec(n, dict(overrides.get(n, {}))) for n in FEATURE_ORDER]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    column_names: tuple
    warmup: int
    timestamps: Optional[np.ndarray] = None


def compute_indicators(open_, high, low, close, specs: Optional[Sequence[IndicatorSpec]] = None) -> tuple[np.ndarray, list]:
    """Full-length (n, k) indicator matrix with NaN warm-up rows kept."""
    specs = list(specs) if specs is not None else default_specs()
    prices = {"open": _as_array(open_), "high": _as_array(high), "low": _as_array(low), "close": _as_array(close)}
    cols = []
    for spec in specs:
        fn, _ = _REGISTRY[spec.name]
        cols.append(fn(prices, **spec.resolved_params()))
    return np.column_stack(cols), [s.name for s in specs]


def warmup_rows(values: np.ndarray) -> int:
    bad = np.isnan(values).any(axis=1)
    if bad.all():
        return values.shape[0]
    return int(np.argmin(bad))


def compute_feature_matrix(bars, specs: Optional[Sequence[IndicatorSpec]] = None) -> FeatureMatrix:
    """Indicators for ``bars`` with warm-up rows dropped (count in ``warmup``)."""
    values, names = compute_indicators(bars.open, bars.high, bars.low, bars.close, specs)
    warm = warmup_rows(values)
    if warm >= values.shape[0]:
        raise DataError(f"{len(bars)} bars are not enough history for the indicator lookbacks")
    trimmed = values[warm:]
    if np.isnan(trimmed).any():
        raise DataError("undefined indicator values after warm-up")
    return FeatureMatrix(trimmed, tuple(names), warm, np.asarray(bars.timestamp)[warm:])
