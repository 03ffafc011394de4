"""Pipeline configuration: one flat set of knobs, loadable from JSON or YAML."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .arima import ArimaOrder
from .arnn import ArnnArchitecture, TrainConfig
from .errors import ConfigError, DataError
from .indicators import default_specs
from .timeseries_io import SplitSpec
from .wavelet import get_filter

DENOISE_ORDERS = ("features", "prices")


@dataclass(frozen=True)
class PipelineConfig:
    # wavelet denoising
    denoise: bool = True
    denoise_order: str = "features"  # "features": indicators on raw OHLC, then denoise columns
    denoise_full_series: bool = False  # True mirrors the paper: one pass over the whole series
    wavelet: str = "sym15"
    wavelet_level: int = 4
    threshold: str = "hard"
    # indicators: name -> {param: period}
    indicator_periods: dict = field(default_factory=dict)
    # splits and windows
    test_fraction: float = 0.25
    val_fraction_of_train: float = 0.20
    T: int = 10
    horizon: int = 1
    exo_channels: int = 1  # decoder inputs: 1 = close; 3 = close, high, low
    # network
    kind: str = "arnn"
    encoder_layers: tuple = (64, 32)
    decoder_layers: tuple = (64, 32)
    step_feature_dim: int = 10
    head_rnn_width: int = 32
    head_dense: tuple = (16, 1)
    forget_bias: float = 1.0
    rnn_bias: bool = True
    # training
    batch_size: int = 64
    epochs: int = 100
    learning_rate: float = 0.001
    seed: int = 0
    keep_best: bool = True
    optimizer: str = "adam"
    # residual model
    use_arima: bool = True
    arima_order: tuple = (3, 0, 0)
    refit_every: int = 0

    def __post_init__(self):
        for name in ("encoder_layers", "decoder_layers", "head_dense", "arima_order"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        object.__setattr__(self, "indicator_periods", dict(self.indicator_periods or {}))
        if self.denoise_order not in DENOISE_ORDERS:
            raise ConfigError(f"denoise_order must be one of {DENOISE_ORDERS}")
        if self.threshold != "hard":
            raise ConfigError("only the hard threshold rule is supported")
        if self.wavelet_level < 1 or self.T < 1 or self.horizon < 1 or self.refit_every < 0:
            raise ConfigError("wavelet_level, T and horizon must be >= 1; refit_every >= 0")
        if self.exo_channels not in (1, 3):
            raise ConfigError("exo_channels must be 1 (close) or 3 (close, high, low)")
        get_filter(self.wavelet)
        try:
            self.split_spec()
            self.train_config()
            self.architecture()
            ArimaOrder.coerce(self.arima_order)
            default_specs(self.indicator_periods)
        except (DataError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.test_fraction, self.val_fraction_of_train)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.batch_size, self.epochs, self.learning_rate, self.seed, self.keep_best,
                           self.optimizer)

    def architecture(self, n_features: int = 16, n_exo: int = 1) -> ArnnArchitecture:
        return ArnnArchitecture(
            T=self.T, encoder_layers=self.encoder_layers, decoder_layers=self.decoder_layers,
            step_feature_dim=self.step_feature_dim, head_rnn_width=self.head_rnn_width,
            head_dense=self.head_dense, n_features=n_features, n_exo=n_exo, kind=self.kind,
            forget_bias=self.forget_bias, rnn_bias=self.rnn_bias,
        )

    def indicator_specs(self):
        return default_specs(self.indicator_periods)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "PipelineConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **kw) -> "PipelineConfig":
        return PipelineConfig.from_dict({**self.to_dict(), **kw})


def load_config(path) -> PipelineConfig:
    """Read a ``.json`` or ``.yaml``/``.yml`` file of flat key/value pairs."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {p} must be a mapping of keys to values")
    return PipelineConfig.from_dict(data)
