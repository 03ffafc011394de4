"""End-to-end hybrid forecaster: denoise, featurize, ARNN, ARIMA on residuals, evaluate.

Rows are split chronologically on bar indices first. Indicator warm-up rows are
then dropped from the head of the training block, so validation and test keep
their full length. Everything downstream works on :class:`PreparedData`, which
can also be built straight from arrays.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import arima as arima_mod
from . import arnn as arnn_mod
from .config import PipelineConfig
from .errors import DataError, SingularDesignError
from .indicators import compute_indicators, warmup_rows
from .metrics import all_metrics, combine, residual_series
from .timeseries_io import (
    BarSeries,
    MinMaxScaler,
    WindowedDataset,
    apply_minmax,
    chronological_split,
    fit_minmax,
    invert_minmax,
    make_windows,
)
from .wavelet import denoise, get_filter, noise_sigma

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
VARIANTS = ("rnn", "lstm", "arnn", "arnn_arima")


def _sha256(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode() + str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- data preparation


@dataclass(frozen=True, eq=False)
class PreparedData:
    features: np.ndarray  # (n, k) encoder inputs, warm-up rows removed
    target: np.ndarray  # (n,) pipeline close: decoder input and label
    raw_close: np.ndarray  # (n,) undenoised close on the same rows
    bounds: tuple  # (n_train, n_val, n_test) row counts
    timestamps: Optional[np.ndarray] = None
    feature_names: tuple = ()
    warmup: int = 0
    sigmas: dict = field(default_factory=dict)
    extra_exo: Optional[np.ndarray] = None  # (n, e) decoder channels after the target, price units

    def __post_init__(self):
        n = self.target.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n or self.raw_close.shape != (n,):
            raise DataError("features, target and raw close must cover the same rows")
        if self.extra_exo is None:
            object.__setattr__(self, "extra_exo", np.zeros((n, 0)))
        if self.extra_exo.ndim != 2 or self.extra_exo.shape[0] != n:
            raise DataError("extra decoder channels must be an (n, e) array")
        if sum(self.bounds) != n or min(self.bounds) < 1:
            raise DataError(f"split sizes {self.bounds} do not partition {n} rows")

    @property
    def n_exo(self) -> int:
        return 1 + self.extra_exo.shape[1]

    def segment(self, name: str) -> slice:
        a, b, _ = self.bounds
        return {"train": slice(0, a), "val": slice(a, a + b), "test": slice(a + b, None)}[name]

    @classmethod
    def from_arrays(cls, features, target, bounds, raw_close=None, timestamps=None) -> "PreparedData":
        f = np.asarray(features, dtype=np.float64)
        y = np.asarray(target, dtype=np.float64)
        if f.ndim == 1:
            f = f[:, None]
        raw = y if raw_close is None else np.asarray(raw_close, dtype=np.float64)
        return cls(f, y, raw, tuple(int(b) for b in bounds), timestamps,
                   tuple(f"f{i}" for i in range(f.shape[1])))


def max_level(n: int, wavelet="sym15") -> int:
    """Deepest transform level whose every stage input has at least filter-length samples."""
    L = len(get_filter(wavelet))
    level = 0
    while n >= L:
        level += 1
        n = (n + L - 1) // 2
    return level


def _denoise_column(x: np.ndarray, cfg: PipelineConfig, bounds, sigma: Optional[float]):
    """Denoise one column; returns ``(denoised, sigma)`` with sigma from the training block."""
    n_train = bounds[0]
    if sigma is None:
        ref = x if cfg.denoise_full_series else x[:n_train]
        sigma = noise_sigma(ref, cfg.wavelet)
    if cfg.denoise_full_series:
        segs = [x]
    else:
        edges = np.cumsum((0,) + tuple(bounds))
        segs = [x[edges[i]:edges[i + 1]] for i in range(3)]
    out = []
    for seg in segs:
        level = min(cfg.wavelet_level, max_level(seg.shape[0], cfg.wavelet))
        if level < 1:
            raise DataError(f"a split of {seg.shape[0]} rows is too short for the {cfg.wavelet} filter")
        if level < cfg.wavelet_level:
            logger.warning("split of %d rows: wavelet level reduced to %d", seg.shape[0], level)
        out.append(denoise(seg, cfg.wavelet, level, sigma=sigma))
    return np.concatenate(out), float(sigma)


def prepare_data(bars: BarSeries, cfg: PipelineConfig = PipelineConfig(),
                 sigmas: Optional[dict] = None) -> PreparedData:
    """Split, featurize and (optionally) denoise a bar series.

    ``sigmas`` reuses noise levels from an earlier fit so evaluation thresholds
    match training exactly.
    """
    n = len(bars)
    chronological_split(np.arange(n), cfg.split_spec())  # validates n
    n_train, n_val, n_test = cfg.split_spec().sizes(n)
    sigmas = dict(sigmas or {})
    specs = cfg.indicator_specs()
    ohlc = {c: np.asarray(getattr(bars, c), dtype=np.float64) for c in ("open", "high", "low", "close")}
    raw_close = ohlc["close"]
    bar_bounds = (n_train, n_val, n_test)

    if cfg.denoise and cfg.denoise_order == "prices":
        used = {}
        for c, col in ohlc.items():
            used[c], sigmas[c] = _denoise_column(col, cfg, bar_bounds, sigmas.get(c))
        ohlc = used
    values, names = compute_indicators(ohlc["open"], ohlc["high"], ohlc["low"], ohlc["close"], specs)
    warm = warmup_rows(values)
    if n_train - warm < cfg.T + cfg.horizon + 1:
        raise DataError(f"{n} bars leave only {n_train - warm} training rows after the {warm}-row "
                        "indicator warm-up; supply more history")
    features = values[warm:]
    target = ohlc["close"][warm:]
    bounds = (n_train - warm, n_val, n_test)
    if np.isnan(features).any():
        raise DataError("undefined indicator values after warm-up")

    if cfg.denoise and cfg.denoise_order == "features":
        cols = []
        feat_sig = sigmas.get("features") or [None] * features.shape[1]
        new_sig = []
        for j in range(features.shape[1]):
            col, s = _denoise_column(features[:, j], cfg, bounds, feat_sig[j])
            cols.append(col)
            new_sig.append(s)
        features = np.column_stack(cols)
        target, sigmas["close"] = _denoise_column(target, cfg, bounds, sigmas.get("close"))
        sigmas["features"] = new_sig
    extra = None
    if cfg.exo_channels == 3:
        chans = []
        for c in ("high", "low"):
            col = ohlc[c][warm:]
            if cfg.denoise and cfg.denoise_order == "features":
                col, sigmas[c] = _denoise_column(col, cfg, bounds, sigmas.get(c))
            chans.append(col)
        extra = np.column_stack(chans)
    return PreparedData(features, target, raw_close[warm:].copy(), bounds,
                        np.asarray(bars.timestamp)[warm:], tuple(names), warm, sigmas, extra)


@dataclass(frozen=True, eq=False)
class ScaledSplits:
    train: WindowedDataset
    val: WindowedDataset
    test: WindowedDataset
    feature_scaler: MinMaxScaler
    target_scaler: MinMaxScaler

    def __getitem__(self, name):
        return getattr(self, name)


def _decoder_inputs(data: PreparedData, target_scaler: MinMaxScaler) -> np.ndarray:
    """Scaled target plus any extra price channels, all on the target's scale."""
    ys = apply_minmax(target_scaler, data.target)
    if not data.extra_exo.shape[1]:
        return ys[:, None]
    lo, hi = float(target_scaler.x_min[0]), float(target_scaler.x_max[0])
    span = hi - lo if hi > lo else 1.0
    return np.column_stack([ys, (data.extra_exo - lo) / span])


def window_splits(data: PreparedData, cfg: PipelineConfig, feature_scaler=None,
                  target_scaler=None) -> ScaledSplits:
    """Scale with training statistics and window each split separately."""
    tr = data.segment("train")
    fs = feature_scaler or fit_minmax(data.features[tr])
    ts = target_scaler or fit_minmax(data.target[tr])
    Xs = apply_minmax(fs, data.features)
    ys = apply_minmax(ts, data.target)
    Zs = _decoder_inputs(data, ts)
    out = {}
    for name in SPLITS:
        seg = data.segment(name)
        offset = seg.start
        try:
            ds = make_windows(Xs[seg], Zs[seg], ys[seg], cfg.T, cfg.horizon)
        except DataError as exc:
            raise DataError(f"{name} split: {exc}") from exc
        out[name] = WindowedDataset(ds.X, ds.Z, ds.Y, ds.T, ds.horizon, ds.target_rows + offset)
    return ScaledSplits(out["train"], out["val"], out["test"], fs, ts)


# ---------------------------------------------------------------- model


@dataclass(frozen=True, eq=False)
class HybridModel:
    arnn: arnn_mod.ArnnWeights
    residual_model: Optional[arima_mod.ArimaModel]  # None: residual forecast is identically 0
    feature_scaler: MinMaxScaler
    target_scaler: MinMaxScaler
    config: PipelineConfig
    train_residuals: np.ndarray
    sigmas: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    train_seconds: float = 0.0

    def residual_forecasts(self, observed_residuals, horizon: int):
        """One forecast per observed residual, each made ``horizon`` steps ahead."""
        obs = np.asarray(observed_residuals, dtype=np.float64)
        if self.residual_model is None:
            return np.zeros(obs.shape[0]), None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", arima_mod.NonStationaryWarning)
            return arima_mod.rolling_forecast(
                self.residual_model, obs, horizon=horizon, refit_every=self.config.refit_every,
                history=self.train_residuals,
            )


def _fit_residual_model(resid: np.ndarray, cfg: PipelineConfig):
    if not cfg.use_arima:
        return None
    try:
        return arima_mod.fit(resid, cfg.arima_order)
    except SingularDesignError as exc:
        warnings.warn(f"residual ARIMA fit is singular ({exc}); using a zero residual forecast",
                      RuntimeWarning, stacklevel=3)
        logger.warning("residual ARIMA singular; falling back to zero residual forecast")
        return None


def fit_prepared(data: PreparedData, cfg: PipelineConfig = PipelineConfig(),
                 weights: Optional[arnn_mod.ArnnWeights] = None) -> HybridModel:
    """Train the network (unless ``weights`` is given) and fit ARIMA on its training residuals."""
    splits = window_splits(data, cfg)
    arch = cfg.architecture(data.features.shape[1], data.n_exo)
    t0 = time.perf_counter()
    if weights is None:
        weights = arnn_mod.train(splits.train, arch, cfg.train_config(), splits.val)
    elif weights.architecture != arch:
        raise DataError("supplied weights do not match the configured architecture")
    train_seconds = time.perf_counter() - t0
    pred = invert_minmax(splits.target_scaler, arnn_mod.predict_batch(weights, splits.train.X, splits.train.Z))
    truth = data.target[splits.train.target_rows]
    resid = residual_series(truth, pred)
    model = _fit_residual_model(resid, cfg)
    tr = data.segment("train")
    provenance = {
        "train_data_sha256": _sha256(data.features[tr], data.target[tr]),
        "arnn_sha256": hashlib.sha256(arnn_mod.weights_to_bytes(weights)).hexdigest(),
        "train_residuals_sha256": _sha256(resid),
    }
    return HybridModel(weights, model, splits.feature_scaler, splits.target_scaler, cfg, resid,
                       dict(data.sigmas), provenance, train_seconds)


def fit_hybrid(bars: BarSeries, cfg: PipelineConfig = PipelineConfig()) -> HybridModel:
    return fit_prepared(prepare_data(bars, cfg), cfg)


# ---------------------------------------------------------------- evaluation


@dataclass(frozen=True, eq=False)
class ForecastReport:
    target_rows: np.ndarray
    timestamps: Optional[np.ndarray]
    y_true: np.ndarray  # pipeline target, price units
    y_pred: np.ndarray  # hybrid forecast
    y_arnn: np.ndarray
    r_hat: np.ndarray
    y_raw: np.ndarray  # undenoised close on the same rows
    norm_lo: float
    norm_hi: float
    metrics: dict
    config: dict
    provenance: dict
    train_seconds: float = 0.0
    eval_seconds: float = 0.0

    def __post_init__(self):
        n = self.y_true.shape[0]
        for name in ("y_pred", "y_arnn", "r_hat", "y_raw"):
            if getattr(self, name).shape != (n,):
                raise DataError(f"{name} length differs from y_true")

    @staticmethod
    def compute_metrics(y_true, y_pred, y_arnn, y_raw, lo, hi) -> dict:
        span = (hi - lo) if hi > lo else 1.0
        norm = lambda v: (np.asarray(v) - lo) / span  # noqa: E731
        return {
            "hybrid": all_metrics(y_pred, y_true),
            "arnn": all_metrics(y_arnn, y_true),
            "hybrid_vs_raw": all_metrics(y_pred, y_raw),
            "arnn_vs_raw": all_metrics(y_arnn, y_raw),
            "hybrid_normalized": all_metrics(norm(y_pred), norm(y_true)),
            "arnn_normalized": all_metrics(norm(y_arnn), norm(y_true)),
        }

    def recompute_metrics(self) -> dict:
        return self.compute_metrics(self.y_true, self.y_pred, self.y_arnn, self.y_raw, self.norm_lo, self.norm_hi)

    @property
    def rmse(self) -> float:
        return self.metrics["hybrid"]["rmse"]

    @property
    def da(self) -> float:
        return self.metrics["hybrid"]["da"]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "metrics": self.metrics,
            "runtime_seconds": {"train": self.train_seconds, "evaluate": self.eval_seconds},
            "provenance": self.provenance,
            "normalization": {"lo": self.norm_lo, "hi": self.norm_hi},
            "vectors": {
                "target_rows": self.target_rows.tolist(),
                "timestamps": None if self.timestamps is None else [int(t) for t in self.timestamps],
                "y_true": self.y_true.tolist(),
                "y_pred": self.y_pred.tolist(),
                "y_arnn": self.y_arnn.tolist(),
                "r_hat": self.r_hat.tolist(),
                "y_raw": self.y_raw.tolist(),
            },
        }


def evaluate_prepared(model: HybridModel, data: PreparedData) -> ForecastReport:
    """Rolling one-step-ahead (``horizon``-ahead) evaluation over the test split.

    The residual model's state is advanced through the validation residuals
    first and then through the test residuals as each true value is observed.
    """
    t0 = time.perf_counter()
    cfg = model.config
    splits = window_splits(data, cfg, model.feature_scaler, model.target_scaler)
    tr = data.segment("train")
    if _sha256(data.features[tr], data.target[tr]) != model.provenance.get("train_data_sha256"):
        logger.warning("evaluation data's training block differs from the one the model was fitted on")
    preds, truths, rows = [], [], []
    for name in ("val", "test"):
        ds = splits[name]
        preds.append(invert_minmax(model.target_scaler, arnn_mod.predict_batch(model.arnn, ds.X, ds.Z)))
        truths.append(data.target[ds.target_rows])
        rows.append(ds.target_rows)
    n_val = preds[0].shape[0]
    y_arnn_all = np.concatenate(preds)
    y_true_all = np.concatenate(truths)
    r_hat_all, _ = model.residual_forecasts(residual_series(y_true_all, y_arnn_all), cfg.horizon)
    y_arnn = y_arnn_all[n_val:]
    y_true = y_true_all[n_val:]
    r_hat = r_hat_all[n_val:]
    y_pred = combine(y_arnn, r_hat)
    y_raw = data.raw_close[rows[1]]
    lo, hi = float(model.target_scaler.x_min[0]), float(model.target_scaler.x_max[0])
    metrics = ForecastReport.compute_metrics(y_true, y_pred, y_arnn, y_raw, lo, hi)
    prov = dict(model.provenance)
    prov["eval_data_sha256"] = _sha256(data.features, data.target)
    ts = None if data.timestamps is None else np.asarray(data.timestamps)[rows[1]]
    return ForecastReport(rows[1], ts, y_true, y_pred, y_arnn, r_hat, y_raw, lo, hi, metrics,
                          cfg.to_dict(), prov, model.train_seconds, time.perf_counter() - t0)


def evaluate(model: HybridModel, bars: BarSeries) -> ForecastReport:
    """Evaluate on the test split of ``bars`` (the full series, split per the model's config)."""
    return evaluate_prepared(model, prepare_data(bars, model.config, model.sigmas))


def predict_next(model: HybridModel, bars: BarSeries) -> dict:
    """Forecast the close ``horizon`` bars past the end of ``bars``."""
    cfg = model.config
    data = prepare_data(bars, cfg, model.sigmas)
    splits = window_splits(data, cfg, model.feature_scaler, model.target_scaler)
    Xs = apply_minmax(model.feature_scaler, data.features)[-cfg.T:]
    zs = _decoder_inputs(data, model.target_scaler)[-cfg.T:]
    y_arnn = float(invert_minmax(model.target_scaler, arnn_mod.predict(model.arnn, Xs, zs)))
    r_hat = 0.0
    if model.residual_model is not None:
        obs = []
        for name in ("val", "test"):
            ds = splits[name]
            p = invert_minmax(model.target_scaler, arnn_mod.predict_batch(model.arnn, ds.X, ds.Z))
            obs.append(residual_series(data.target[ds.target_rows], p))
        _, state = model.residual_forecasts(np.concatenate(obs), cfg.horizon)
        r_hat = float(arima_mod.forecast(state, cfg.horizon)[-1])
    last_ts = int(bars.timestamp[-1])
    return {
        "timestamp": last_ts + cfg.horizon * int(bars.interval_seconds),
        "arnn": y_arnn,
        "residual": r_hat,
        "hybrid": y_arnn + r_hat,
    }


# ---------------------------------------------------------------- benchmark


@dataclass(frozen=True, eq=False)
class BenchmarkCell:
    variant: str
    denoised: bool
    report: Optional[ForecastReport] = None
    train_seconds: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.report is not None

    def row(self) -> dict:
        d = {"variant": self.variant, "denoised": self.denoised, "train_seconds": self.train_seconds,
             "error": self.error}
        if self.report is not None:
            d.update({k: self.report.metrics["hybrid"][k] for k in ("rmse", "mape_percent", "da")})
            d["normalized"] = self.report.metrics["hybrid_normalized"]
            d["vs_raw"] = self.report.metrics["hybrid_vs_raw"]
        return d


@dataclass(frozen=True, eq=False)
class BenchmarkGrid:
    cells: list
    config: dict
    split_bounds: dict

    def ranked(self) -> list:
        """Successful cells by ascending RMSE, then failed cells in grid order."""
        good = sorted((c for c in self.cells if c.ok), key=lambda c: c.report.rmse)
        return good + [c for c in self.cells if not c.ok]

    def cell(self, variant: str, denoised: bool) -> BenchmarkCell:
        for c in self.cells:
            if c.variant == variant and c.denoised == denoised:
                return c
        raise KeyError((variant, denoised))

    def to_dict(self) -> dict:
        return {"config": self.config, "splits": self.split_bounds,
                "cells": [c.row() for c in self.cells],
                "ranking": [[c.variant, c.denoised] for c in self.ranked()]}

    def table(self) -> str:
        lines = [f"{'variant':<12}{'denoised':<10}{'RMSE':>12}{'MAPE %':>10}{'DA %':>8}{'train s':>10}"]
        for c in self.ranked():
            if c.ok:
                m = c.report.metrics["hybrid"]
                mp = "n/a" if m["mape_percent"] is None else f"{m['mape_percent']:.4f}"
                lines.append(f"{c.variant:<12}{str(c.denoised):<10}{m['rmse']:>12.6f}{mp:>10}"
                             f"{100 * m['da']:>8.2f}{c.train_seconds:>10.1f}")
            else:
                lines.append(f"{c.variant:<12}{str(c.denoised):<10}  FAILED: {c.error}")
        return "\n".join(lines)


def _variant_config(cfg: PipelineConfig, variant: str, denoised: bool) -> PipelineConfig:
    if variant not in VARIANTS:
        raise DataError(f"unknown benchmark variant {variant!r}; expected one of {VARIANTS}")
    kind = "arnn" if variant.startswith("arnn") else variant
    return cfg.with_overrides(kind=kind, use_arima=(variant == "arnn_arima"), denoise=denoised)


def run_benchmark(bars: BarSeries, cfg: PipelineConfig = PipelineConfig(),
                  variants: Sequence[str] = VARIANTS, denoise_flags: Sequence[bool] = (True, False),
                  data_by_flag: Optional[dict] = None) -> BenchmarkGrid:
    """Every (variant, denoised) cell on identical splits and seeds.

    ``arnn`` and ``arnn_arima`` share one trained network per denoise flag;
    both cells report that network's training time. A failing cell is
    recorded and the rest continue.
    """
    cells = []
    prepared = dict(data_by_flag or {})
    trained = {}
    bounds = {}
    for denoised in denoise_flags:
        for variant in variants:
            vcfg = _variant_config(cfg, variant, denoised)
            try:
                if denoised not in prepared:
                    prepared[denoised] = prepare_data(bars, vcfg)
                data = prepared[denoised]
                bounds[str(denoised)] = list(data.bounds)
                key = (vcfg.kind, denoised)
                if key in trained:
                    weights, secs = trained[key]
                    model = fit_prepared(data, vcfg, weights)
                else:
                    model = fit_prepared(data, vcfg)
                    secs = model.train_seconds
                    trained[key] = (model.arnn, secs)
                report = evaluate_prepared(model, data)
                cells.append(BenchmarkCell(variant, denoised, report, secs))
            except Exception as exc:  # per-cell isolation is the point here
                logger.exception("benchmark cell %s/denoised=%s failed", variant, denoised)
                cells.append(BenchmarkCell(variant, denoised, None, 0.0, f"{type(exc).__name__}: {exc}"))
    return BenchmarkGrid(cells, cfg.to_dict(), bounds)


# ---------------------------------------------------------------- persistence

MODEL_JSON = "model.json"
WEIGHTS_FILE = "arnn.weights"


def save_model(model: HybridModel, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    arnn_mod.save_weights(model.arnn, d / WEIGHTS_FILE)
    doc = {
        "config": model.config.to_dict(),
        "residual_model": None if model.residual_model is None else model.residual_model.to_dict(),
        "feature_scaler": model.feature_scaler.to_dict(),
        "target_scaler": model.target_scaler.to_dict(),
        "train_residuals": model.train_residuals.tolist(),
        "sigmas": model.sigmas,
        "provenance": model.provenance,
        "train_seconds": model.train_seconds,
    }
    (d / MODEL_JSON).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_model(directory) -> HybridModel:
    d = Path(directory)
    try:
        doc = json.loads((d / MODEL_JSON).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model from {d}: {exc}") from exc
    cfg = PipelineConfig.from_dict(doc["config"])
    weights = arnn_mod.load_weights(d / WEIGHTS_FILE)
    if hashlib.sha256(arnn_mod.weights_to_bytes(weights)).hexdigest() != doc["provenance"].get("arnn_sha256"):
        raise DataError("weight file does not match the model's recorded provenance")
    rm = doc["residual_model"]
    return HybridModel(
        weights,
        None if rm is None else arima_mod.ArimaModel.from_dict(rm),
        MinMaxScaler.from_dict(doc["feature_scaler"]),
        MinMaxScaler.from_dict(doc["target_scaler"]),
        cfg,
        np.asarray(doc["train_residuals"], dtype=np.float64),
        doc.get("sigmas", {}),
        doc["provenance"],
        float(doc.get("train_seconds", 0.0)),
    )
