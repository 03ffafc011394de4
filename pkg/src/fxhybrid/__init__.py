"""Wavelet-denoised attention RNN with ARIMA residual correction for FX price forecasting."""

__version__ = "0.1.0"
