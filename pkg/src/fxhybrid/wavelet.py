"""Multilevel DWT with orthonormal filters, MAD noise estimate and hard-threshold denoising.

Coefficient layout follows the common "symmetric" convention: each level
extends its input by ``L - 1`` half-point mirrored samples per side, filters,
and keeps odd-phase samples, giving ``(n + L - 1) // 2`` coefficients per band.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import ConfigError, DataError

# Decomposition lowpass filters (convolution order).
_DEC_LO = {
    "haar": [0.7071067811865476, 0.7071067811865476],
    "db4": [
        -0.010597401785069032, 0.0328830116668852, 0.030841381835560764,
        -0.18703481171909309, -0.027983769416859854, 0.6308807679298589,
        0.7148465705529157, 0.2303778133088965,
    ],
    "sym15": [
        9.712419737963348e-06, -7.35966679891947e-06, -0.00016066186637495343,
        5.512254785558665e-05, 0.0010705672194623959, -0.0002673164464718057,
        -0.0035901654473726417, 0.003423450736351241, 0.01007997708790567,
        -0.01940501143093447, -0.03887671687683349, 0.021937642719753955,
        0.04073547969681068, -0.04108266663538248, 0.11153369514261872,
        0.5786404152150345, 0.7218430296361812, 0.2439627054321663,
        -0.1966263587662373, -0.1340562984562539, 0.06839331006048024,
        0.06796982904487918, -0.008744788886477952, -0.01717125278163873,
        0.0015261382781819983, 0.003481028737064895, -0.00010815440168545525,
        -0.00040216853760293483, 2.171789015077892e-05, 2.866070852531808e-05,
    ],
}

MODES = ("symmetric", "periodic")
MAD_SCALE = 0.6745


@dataclass(frozen=True, eq=False)
class WaveletFilter:
    name: str
    lowpass_dec: np.ndarray
    highpass_dec: np.ndarray
    lowpass_rec: np.ndarray
    highpass_rec: np.ndarray

    @classmethod
    def from_lowpass(cls, name: str, dec_lo) -> "WaveletFilter":
        lo = np.asarray(dec_lo, dtype=np.float64)
        L = lo.shape[0]
        if L < 2 or L % 2:
            raise ConfigError(f"{name}: orthonormal filters have even length >= 2")
        sign = (-1.0) ** (np.arange(L) + 1)
        hi = sign * lo[::-1]
        return cls(name, lo, hi, lo[::-1].copy(), hi[::-1].copy())

    def __len__(self) -> int:
        return self.lowpass_dec.shape[0]


def available_filters() -> list[str]:
    return sorted(_DEC_LO)


def get_filter(name: Union[str, WaveletFilter]) -> WaveletFilter:
    if isinstance(name, WaveletFilter):
        return name
    try:
        return WaveletFilter.from_lowpass(name, _DEC_LO[name])
    except KeyError:
        raise ConfigError(f"unknown wavelet {name!r}; choose from {available_filters()}") from None


@dataclass(frozen=True, eq=False)
class CoeffPyramid:
    approx: np.ndarray
    details: list  # deepest level first
    level: int
    original_length: int
    boundary_mode: str = "symmetric"
    filter_name: str = ""

    def level_lengths(self) -> list[int]:
        """Input length of each decomposition level, finest first."""
        lengths = [self.original_length]
        for d in reversed(self.details[1:]):
            lengths.append(len(d))
        return lengths

    def replace_details(self, details) -> "CoeffPyramid":
        return CoeffPyramid(
            self.approx, list(details), self.level, self.original_length,
            self.boundary_mode, self.filter_name,
        )


def _periodic_index(m: int, L: int, n: int) -> np.ndarray:
    k = np.arange(m)[:, None]
    j = np.arange(L)[None, :]
    return (2 * k + 1 - j) % n


def _analysis(x: np.ndarray, filt: WaveletFilter, mode: str):
    h, g = filt.lowpass_dec, filt.highpass_dec
    L = len(filt)
    if mode == "symmetric":
        xe = np.pad(x, L - 1, mode="symmetric")
        return kernels.analysis_step(xe, h, g)
    if x.shape[0] % 2:
        x = np.append(x, x[-1])
    n = x.shape[0]
    vals = x[_periodic_index(n // 2, L, n)]
    return vals @ h, vals @ g


def _synthesis(a: np.ndarray, d: np.ndarray, filt: WaveletFilter, n: int, mode: str) -> np.ndarray:
    h, g = filt.lowpass_dec, filt.highpass_dec
    if mode == "symmetric":
        return kernels.synthesis_step(a, d, h, g, n)
    n_even = 2 * a.shape[0]
    out = np.zeros(n_even)
    idx = _periodic_index(a.shape[0], len(filt), n_even)
    np.add.at(out, idx, a[:, None] * h[None, :] + d[:, None] * g[None, :])
    return out[:n]


def dwt_multilevel(signal, wavelet: Union[str, WaveletFilter] = "sym15", level: int = 4,
                   mode: str = "symmetric") -> CoeffPyramid:
    filt = get_filter(wavelet)
    if mode not in MODES:
        raise ConfigError(f"unknown boundary mode {mode!r}")
    if level < 1:
        raise DataError("level must be >= 1")
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("signal must be 1-D")
    L = len(filt)
    details = []
    for j in range(1, level + 1):
        if x.shape[0] < L:
            raise DataError(
                f"level {level} too deep: level-{j} input has {x.shape[0]} samples, "
                f"filter {filt.name} needs {L}"
            )
        x, d = _analysis(x, filt, mode)
        details.append(d)
    return CoeffPyramid(x, details[::-1], level, int(np.asarray(signal).shape[0]), mode, filt.name)


def idwt_multilevel(pyramid: CoeffPyramid, wavelet: Union[str, WaveletFilter, None] = None) -> np.ndarray:
    filt = get_filter(wavelet if wavelet is not None else pyramid.filter_name)
    if pyramid.filter_name and filt.name != pyramid.filter_name:
        raise DataError(f"pyramid was built with {pyramid.filter_name}, not {filt.name}")
    if len(pyramid.details) != pyramid.level:
        raise DataError("pyramid detail count does not match its level")
    lengths = pyramid.level_lengths()
    a = np.asarray(pyramid.approx, dtype=np.float64)
    for d, n in zip(pyramid.details, reversed(lengths)):
        d = np.asarray(d, dtype=np.float64)
        if d.shape != a.shape:
            raise DataError("approximation/detail length mismatch")
        a = _synthesis(a, d, filt, n, pyramid.boundary_mode)
    return a


def estimate_sigma(pyramid: CoeffPyramid) -> float:
    """MAD noise estimate from the finest detail band."""
    if not pyramid.details or len(pyramid.details[-1]) == 0:
        raise DataError("pyramid has no finest detail band")
    return float(np.median(np.abs(pyramid.details[-1])) / MAD_SCALE)


def universal_threshold(sigma: float, n: int) -> float:
    if n < 2:
        raise DataError("universal threshold needs n >= 2")
    if sigma < 0:
        raise DataError("sigma must be non-negative")
    return sigma * math.sqrt(2.0 * math.log(n))


def hard_threshold(coeffs, lam: float) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    return np.where(np.abs(c) > lam, c, 0.0)


@dataclass(frozen=True)
class ThresholdRule:
    kind: str = "hard"
    lam: float = 0.0
    sigma_estimate: float = 0.0

    def __post_init__(self):
        if self.kind != "hard":
            raise ConfigError("only hard thresholding is supported")
        if self.lam < 0:
            raise DataError("threshold must be non-negative")


def noise_sigma(signal, wavelet: Union[str, WaveletFilter] = "sym15", mode: str = "symmetric") -> float:
    """MAD sigma of a signal's finest detail band (one-level transform)."""
    return estimate_sigma(dwt_multilevel(signal, wavelet, 1, mode))


def denoise(signal, wavelet: Union[str, WaveletFilter] = "sym15", level: int = 4,
            sigma: Optional[float] = None, mode: str = "symmetric",
            return_rule: bool = False):
    """Universal hard-threshold wavelet denoising.

    ``sigma`` overrides the MAD estimate, e.g. to reuse a training-split noise
    level on later splits. All detail bands share one threshold.
    """
    x = np.asarray(signal, dtype=np.float64)
    pyr = dwt_multilevel(x, wavelet, level, mode)
    if sigma is None:
        sigma = estimate_sigma(pyr)
    rule = ThresholdRule("hard", universal_threshold(sigma, x.shape[0]), float(sigma))
    kept = [hard_threshold(d, rule.lam) for d in pyr.details]
    out = idwt_multilevel(pyr.replace_details(kept), wavelet)
    return (out, rule) if return_rule else out
