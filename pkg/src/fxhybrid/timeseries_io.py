"""Bar ingestion, chronological splits, min-max scaling and window slicing."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("timestamp", "open", "high", "low", "close", "volume")


@dataclass(frozen=True)
class Bar:
    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float

    def violations(self) -> list[str]:
        out = []
        if self.low > min(self.open, self.close):
            out.append("low above min(open, close)")
        if self.high < max(self.open, self.close):
            out.append("high below max(open, close)")
        if self.low > self.high:
            out.append("low above high")
        if self.volume < 0:
            out.append("negative volume")
        return out


def _readonly(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BarSeries:
    """Columnar, immutable OHLCV series on a fixed time grid.

    Bars are stored as parallel numpy columns; ``series[i]`` returns a
    :class:`Bar` and slicing returns a new ``BarSeries``.
    """

    timestamp: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    interval_seconds: int = 300

    def __post_init__(self):
        object.__setattr__(self, "timestamp", _readonly(self.timestamp, np.int64))
        for name in CSV_COLUMNS[1:]:
            object.__setattr__(self, name, _readonly(getattr(self, name), np.float64))
        n = self.timestamp.shape[0]
        if any(getattr(self, c).shape != (n,) for c in CSV_COLUMNS):
            raise DataError("bar columns must be 1-D and of equal length")
        if self.interval_seconds <= 0:
            raise DataError("interval_seconds must be positive")
        if n > 1:
            steps = np.diff(self.timestamp)
            if np.any(steps <= 0):
                i = int(np.argmax(steps <= 0)) + 1
                raise DataError(f"timestamps not strictly increasing at bar {i}")
            if np.any(steps % self.interval_seconds):
                i = int(np.argmax(steps % self.interval_seconds != 0)) + 1
                raise DataError(f"bar {i} is off the {self.interval_seconds}s grid")
        bad = (
            (self.low > np.minimum(self.open, self.close))
            | (self.high < np.maximum(self.open, self.close))
            | (self.low > self.high)
            | (self.volume < 0)
        )
        if np.any(bad):
            rows = np.flatnonzero(bad)
            raise DataError(f"OHLC invariants violated at bars {rows[:20].tolist()}")

    @classmethod
    def from_bars(cls, bars, interval_seconds: Optional[int] = None) -> "BarSeries":
        bars = list(bars)
        cols = {c: [getattr(b, c) for b in bars] for c in CSV_COLUMNS}
        ts = np.asarray(cols["timestamp"], dtype=np.int64)
        if interval_seconds is None:
            interval_seconds = infer_interval(ts)
        return cls(**cols, interval_seconds=interval_seconds)

    def __len__(self) -> int:
        return self.timestamp.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return BarSeries(
                *(getattr(self, c)[idx] for c in CSV_COLUMNS),
                interval_seconds=self.interval_seconds,
            )
        i = int(idx)
        return Bar(int(self.timestamp[i]), *(float(getattr(self, c)[i]) for c in CSV_COLUMNS[1:]))

    def __iter__(self) -> Iterator[Bar]:
        for i in range(len(self)):
            yield self[i]

    @property
    def bars(self) -> list[Bar]:
        return list(self)


def infer_interval(timestamps: np.ndarray) -> int:
    if len(timestamps) < 2:
        return 300
    steps = np.diff(np.asarray(timestamps, dtype=np.int64))
    positive = steps[steps > 0]
    if positive.size == 0:
        raise DataError("timestamps not strictly increasing")
    return int(np.gcd.reduce(positive))


def parse_timestamp(text: str) -> int:
    """Epoch seconds or ISO-8601 (naive values are taken as UTC)."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        as_float = float(text)
    except ValueError:
        pass
    else:
        if as_float.is_integer():
            return int(as_float)
        raise ValueError(f"fractional epoch seconds: {text!r}")
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def load_csv(path, interval_seconds: Optional[int] = None) -> BarSeries:
    """Read ``timestamp,open,high,low,close,volume`` bars.

    Raises :class:`DataError` naming the offending line(s) for malformed rows,
    OHLC violations and non-monotonic timestamps.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    rows = []
    bad_ohlc = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != CSV_COLUMNS:
            raise DataError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_COLUMNS):
                raise DataError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            try:
                bar = Bar(parse_timestamp(row[0]), *(float(v) for v in row[1:]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not all(math.isfinite(v) for v in (bar.open, bar.high, bar.low, bar.close, bar.volume)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if bar.violations():
                bad_ohlc.append(lineno)
            if rows and bar.timestamp <= rows[-1][1].timestamp:
                raise DataError(f"{path}:{lineno}: timestamp not after line {rows[-1][0]}")
            rows.append((lineno, bar))
    if bad_ohlc:
        raise DataError(f"{path}: OHLC ordering violated on line(s) {bad_ohlc[:50]}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return BarSeries.from_bars((b for _, b in rows), interval_seconds)


def write_csv(series: BarSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in range(len(series)):
            w.writerow(
                [int(series.timestamp[i])]
                + [repr(float(getattr(series, c)[i])) for c in CSV_COLUMNS[1:]]
            )


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25
    val_fraction_of_train: float = 0.20

    def __post_init__(self):
        for name in ("test_fraction", "val_fraction_of_train"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DataError(f"{name} must lie in (0, 1), got {v}")

    def sizes(self, n: int) -> tuple[int, int, int]:
        n_test = _round_half_up(self.test_fraction * n)
        n_val = _round_half_up(self.val_fraction_of_train * (n - n_test))
        return n - n_test - n_val, n_val, n_test


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def chronological_split(series, spec: SplitSpec = SplitSpec()):
    """Split into (train, val, test) contiguous blocks, test last.

    Works on anything sliceable along its first axis (``BarSeries``, arrays).
    """
    n = len(series)
    if n < 10:
        raise DataError(f"need at least 10 rows to split, got {n}")
    n_train, n_val, n_test = spec.sizes(n)
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"{n} rows cannot populate all three splits under {spec}")
    return (
        series[:n_train],
        series[n_train : n_train + n_val],
        series[n_train + n_val :],
    )


@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    x_min: Optional[np.ndarray] = None
    x_max: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.x_min is not None:
            object.__setattr__(self, "x_min", _readonly(np.atleast_1d(self.x_min), np.float64))
            object.__setattr__(self, "x_max", _readonly(np.atleast_1d(self.x_max), np.float64))
            if np.any(self.x_max < self.x_min):
                raise DataError("x_max must be >= x_min")

    @property
    def fitted(self) -> bool:
        return self.x_min is not None

    @property
    def degenerate(self) -> np.ndarray:
        """Columns whose training range is zero; these scale to 0."""
        self._check()
        return self.x_max == self.x_min

    def _check(self):
        if not self.fitted:
            raise DataError("scaler is not fitted")

    def to_dict(self) -> dict:
        self._check()
        return {"x_min": self.x_min.tolist(), "x_max": self.x_max.tolist()}

    @classmethod
    def from_dict(cls, d) -> "MinMaxScaler":
        return cls(np.asarray(d["x_min"], float), np.asarray(d["x_max"], float))


def fit_minmax(train_features) -> MinMaxScaler:
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise DataError("need at least 2 rows to fit a scaler")
    scaler = MinMaxScaler(x.min(axis=0), x.max(axis=0))
    if np.any(scaler.degenerate):
        logger.warning("constant column(s) %s scale to 0", np.flatnonzero(scaler.degenerate).tolist())
    return scaler


def apply_minmax(scaler: MinMaxScaler, x) -> np.ndarray:
    scaler._check()
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1 and scaler.x_min.shape[0] == 1
    x2 = x[:, None] if squeeze else x
    if x2.ndim != 2 or x2.shape[1] != scaler.x_min.shape[0]:
        raise DataError(f"expected {scaler.x_min.shape[0]} columns, got shape {x.shape}")
    span = scaler.x_max - scaler.x_min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (x2 - scaler.x_min) / safe, 0.0)
    return out[:, 0] if squeeze else out


def invert_minmax(scaler: MinMaxScaler, y_norm, column: int = 0) -> np.ndarray:
    scaler._check()
    lo = scaler.x_min[column]
    hi = scaler.x_max[column]
    return np.asarray(y_norm, dtype=np.float64) * (hi - lo) + lo


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    X: np.ndarray  # (samples, T, n_features)
    Z: np.ndarray  # (samples, T, n_exo)
    Y: np.ndarray  # (samples,)
    T: int
    horizon: int
    target_rows: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return self.Y.shape[0]

    def subset(self, idx) -> "WindowedDataset":
        rows = None if self.target_rows is None else self.target_rows[idx]
        return WindowedDataset(self.X[idx], self.Z[idx], self.Y[idx], self.T, self.horizon, rows)


def make_windows(features, exogenous, target, T: int, horizon: int = 1) -> WindowedDataset:
    """Slice aligned rows into (X, Z, y) samples.

    Sample ``i`` takes rows ``[i, i+T)`` as inputs and row ``i+T+horizon-1`` of
    ``target`` as its label.
    """
    X = np.asarray(features, dtype=np.float64)
    Z = np.asarray(exogenous, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Z.ndim == 1:
        Z = Z[:, None]
    if T < 1 or horizon < 1:
        raise DataError("T and horizon must be >= 1")
    n = y.shape[0]
    if X.shape[0] != n or Z.shape[0] != n:
        raise DataError("features, exogenous and target must have the same number of rows")
    count = n - T - horizon + 1
    if count < 1:
        raise DataError(f"{n} rows cannot fill a window of T={T} with horizon={horizon}")
    xw = np.lib.stride_tricks.sliding_window_view(X, T, axis=0)[:count]
    zw = np.lib.stride_tricks.sliding_window_view(Z, T, axis=0)[:count]
    rows = np.arange(count) + T + horizon - 1
    return WindowedDataset(
        np.ascontiguousarray(xw.transpose(0, 2, 1)),
        np.ascontiguousarray(zw.transpose(0, 2, 1)),
        y[rows].copy(),
        T,
        horizon,
        rows,
    )
