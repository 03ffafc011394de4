"""Report serialization and the predictions-vs-truth plot."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

_METRICS = {
    "type": "object",
    "required": ["rmse", "mape_percent", "da"],
    "properties": {
        "rmse": {"type": "number", "minimum": 0},
        "mape_percent": {"type": ["number", "null"], "minimum": 0},
        "da": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

_VECTOR = {"type": "array", "items": {"type": "number"}}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fxhybrid forecast report",
    "type": "object",
    "required": ["config", "metrics", "vectors", "provenance", "runtime_seconds"],
    "properties": {
        "config": {"type": "object"},
        "metrics": {
            "type": "object",
            "required": ["hybrid", "arnn", "hybrid_vs_raw", "arnn_vs_raw", "hybrid_normalized", "arnn_normalized"],
            "additionalProperties": _METRICS,
        },
        "runtime_seconds": {
            "type": "object",
            "required": ["train", "evaluate"],
            "properties": {"train": {"type": "number"}, "evaluate": {"type": "number"}},
        },
        "provenance": {
            "type": "object",
            "required": ["train_data_sha256", "arnn_sha256", "train_residuals_sha256"],
            "additionalProperties": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        },
        "normalization": {"type": "object"},
        "vectors": {
            "type": "object",
            "required": ["target_rows", "y_true", "y_pred", "y_arnn", "r_hat", "y_raw"],
            "properties": {
                "target_rows": {"type": "array", "items": {"type": "integer"}},
                "timestamps": {"type": ["array", "null"], "items": {"type": "integer"}},
                "y_true": _VECTOR,
                "y_pred": _VECTOR,
                "y_arnn": _VECTOR,
                "r_hat": _VECTOR,
                "y_raw": _VECTOR,
            },
        },
    },
}


def _clean(obj):
    # JSON has no NaN/inf; emit null instead
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(_clean(doc), indent=1, sort_keys=True, allow_nan=False))


def plot_forecast(report, path, window: int = 300, start: int = 0) -> None:
    """SVG of truth, ARNN and hybrid forecasts over ``window`` test steps."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sl = slice(start, start + window)
    x = np.arange(report.y_true.shape[0])[sl]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(x, report.y_true[sl], color="black", lw=1.2, label="actual")
    ax.plot(x, report.y_arnn[sl], color="tab:blue", lw=0.9, label="ARNN")
    ax.plot(x, report.y_pred[sl], color="tab:red", lw=0.9, ls="--", label="ARNN + ARIMA")
    ax.set_xlabel("test step")
    ax.set_ylabel("close")
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    # no embedded date, so identical inputs give byte-identical files
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
