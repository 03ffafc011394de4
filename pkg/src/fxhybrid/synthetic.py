"""Seeded synthetic FX-like bar series for tests, demos and benchmarks."""
from __future__ import annotations

import numpy as np

from .timeseries_io import BarSeries


def smooth_price(n: int, seed: int = 0, level: float = 110.0, scale: float = 0.5) -> np.ndarray:
    """Slow mean-reverting drift plus a few incommensurate cycles."""
    rng = np.random.default_rng([seed, 11])
    t = np.arange(n, dtype=np.float64)
    cycles = np.zeros(n)
    for period in rng.uniform(60.0, 400.0, size=4):
        cycles += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
    drift = np.zeros(n)
    steps = rng.normal(0.0, 0.02, size=n)
    for i in range(1, n):
        drift[i] = 0.999 * drift[i - 1] + steps[i]
    return level + scale * (cycles + drift)


def synthetic_bars(n: int = 5000, seed: int = 0, noise: float = 0.05, level: float = 110.0,
                   scale: float = 0.5, start: int = 1_546_300_800, interval: int = 300) -> BarSeries:
    """Bars whose closes are a smooth path plus i.i.d. N(0, (noise*scale)^2) noise.

    Open is the previous close; high/low extend past the body by half-normal
    wicks so every bar satisfies the OHLC ordering.
    """
    rng = np.random.default_rng([seed, 23])
    clean = smooth_price(n, seed, level, scale)
    close = clean + rng.normal(0.0, noise * scale, size=n)
    open_ = np.concatenate(([close[0]], close[:-1]))
    wick = np.abs(rng.normal(0.0, 0.25 * noise * scale, size=(2, n)))
    high = np.maximum(open_, close) + wick[0]
    low = np.minimum(open_, close) - wick[1]
    volume = rng.integers(50, 500, size=n).astype(np.float64)
    ts = start + interval * np.arange(n, dtype=np.int64)
    return BarSeries(ts, open_, high, low, close, volume, interval)


def nonlinear_ar2_target(seed: int = 0, n: int = 3000, k: int = 4, phi=(0.6, 0.3), noise: float = 0.3):
    """Features and a target with a known residual structure.

    ``x`` holds ``k`` AR(1) feature columns; the target is
    ``10 + sin x0 + 0.5 x1 x2 + tanh x3`` evaluated on the previous row plus
    additive AR(2) noise with coefficients ``phi``. A network can learn the
    smooth part but not the serially correlated noise, which an AR model on
    its residuals can partly forecast. Returns ``(x, y)``.
    """
    if k < 4:
        raise ValueError("need at least 4 feature columns")
    rng = np.random.default_rng([seed, 6])
    x = np.zeros((n, k))
    e = rng.normal(size=(n, k))
    for t in range(1, n):
        x[t] = 0.95 * x[t - 1] + 0.3 * e[t]
    f = np.sin(x[:, 0]) + 0.5 * x[:, 1] * x[:, 2] + np.tanh(x[:, 3])
    u = np.zeros(n)
    w = rng.normal(0.0, noise, size=n)
    for t in range(2, n):
        u[t] = phi[0] * u[t - 1] + phi[1] * u[t - 2] + w[t]
    y = np.empty(n)
    y[0] = 10.0 + f[0] + u[0]
    y[1:] = 10.0 + f[:-1] + u[1:]
    return x, y
