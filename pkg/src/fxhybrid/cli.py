"""Command-line interface: ``fxhybrid <command> ...``.

Exit codes: 0 success, 2 data error, 3 numeric failure, 4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .errors import ConfigError, FxHybridError
from .timeseries_io import load_csv, write_csv

logger = logging.getLogger("fxhybrid")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    over = {}
    for key in ("epochs", "seed", "forget_bias", "rnn_bias", "optimizer", "refit_every", "denoise_order",
                "wavelet", "wavelet_level", "T", "exo_channels"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if getattr(args, "no_arima", False):
        over["use_arima"] = False
    if getattr(args, "no_denoise", False):
        over["denoise"] = False
    if getattr(args, "denoise_full_series", False):
        over["denoise_full_series"] = True
    if over:
        cfg = cfg.with_overrides(**over)
    for k, v in cfg.to_dict().items():
        logger.info("config %s = %s", k, json.dumps(v))
    return cfg


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _add_config_flags(p, training: bool = True):
    p.add_argument("--config", help="JSON or YAML file of pipeline settings")
    p.add_argument("--wavelet", help="wavelet filter (haar, db4, sym15)")
    p.add_argument("--wavelet-level", "--level", type=int, dest="wavelet_level")
    p.add_argument("--threshold", choices=("universal-hard",), default="universal-hard",
                   help="threshold rule (only the universal hard rule is implemented)")
    p.add_argument("--no-denoise", action="store_true", help="skip wavelet denoising")
    p.add_argument("--denoise-order", choices=("features", "prices"), dest="denoise_order")
    p.add_argument("--denoise-full-series", action="store_true", dest="denoise_full_series",
                   help="denoise the whole series in one pass instead of per split")
    if training:
        p.add_argument("--T", type=int, dest="T", help="window length")
        p.add_argument("--exo-channels", type=int, choices=(1, 3), dest="exo_channels",
                       help="decoder inputs: 1 = close, 3 = close, high, low")
        p.add_argument("--epochs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--forget-bias", type=float, dest="forget_bias")
        p.add_argument("--rnn-bias", type=_bool, dest="rnn_bias", metavar="{true,false}",
                       help="bias term in the encoder RNN (false gives the bias-free recursion)")
        p.add_argument("--optimizer", choices=("adam", "sgd"))
        p.add_argument("--refit-every", type=int, dest="refit_every")
        p.add_argument("--no-arima", action="store_true", help="pure ARNN (residual forecast 0)")


def cmd_synth(args) -> int:
    from .synthetic import synthetic_bars

    write_csv(synthetic_bars(args.bars, args.seed, args.noise), args.output)
    return 0


def cmd_denoise(args) -> int:
    from .timeseries_io import CSV_COLUMNS
    from .wavelet import denoise

    cfg = _config(args)
    bars = load_csv(args.input)
    raw = np.asarray(getattr(bars, args.column))
    clean, rule = denoise(raw, cfg.wavelet, cfg.wavelet_level, return_rule=True)
    logger.info("sigma %.6g threshold %.6g", rule.sigma_estimate, rule.lam)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*CSV_COLUMNS, f"{args.column}_denoised"])
        for i in range(len(bars)):
            row = [int(bars.timestamp[i])] + [repr(float(getattr(bars, c)[i])) for c in CSV_COLUMNS[1:]]
            w.writerow(row + [repr(float(clean[i]))])
    return 0


def cmd_features(args) -> int:
    from .indicators import compute_feature_matrix
    from .wavelet import denoise

    cfg = _config(args)
    fm = compute_feature_matrix(load_csv(args.input), cfg.indicator_specs())
    logger.info("dropped %d warm-up rows", fm.warmup)
    values = fm.values
    if args.denoise_features:
        # whole-series pass; the training pipeline denoises per split instead
        values = np.column_stack([denoise(values[:, j], cfg.wavelet, cfg.wavelet_level)
                                  for j in range(values.shape[1])])
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", *fm.column_names])
        for t, row in zip(fm.timestamps, values):
            w.writerow([int(t), *(repr(float(v)) for v in row)])
    return 0


def cmd_train(args) -> int:
    from .pipeline import fit_hybrid, save_model

    cfg = _config(args)
    bars = load_csv(args.input)
    t0 = time.perf_counter()
    model = fit_hybrid(bars, cfg)
    save_model(model, args.model)
    meta = model.arnn.metadata
    print(json.dumps({
        "model": str(args.model),
        "train_seconds": round(time.perf_counter() - t0, 3),
        "best_epoch": meta.get("best_epoch"),
        "best_val_loss": meta.get("best_val_loss"),
        "residual_model": None if model.residual_model is None else model.residual_model.to_dict(),
    }, indent=1))
    return 0


def cmd_predict(args) -> int:
    from .pipeline import load_model, predict_next

    model = load_model(args.model)
    out = predict_next(model, load_csv(args.input))
    text = json.dumps(out, indent=1)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return 0


def cmd_evaluate(args) -> int:
    from .pipeline import evaluate, load_model
    from .report import plot_forecast, write_json

    model = load_model(args.model)
    report = evaluate(model, load_csv(args.input))
    write_json(report.to_dict(), args.report)
    if args.plot:
        plot_forecast(report, args.plot, window=args.plot_window)
    print(json.dumps(report.metrics, indent=1))
    return 0


def cmd_benchmark(args) -> int:
    from .pipeline import VARIANTS, run_benchmark
    from .report import write_json

    cfg = _config(args)
    variants = args.variants or list(VARIANTS)
    flags = {"both": (True, False), "yes": (True,), "no": (False,)}[args.denoised]
    grid = run_benchmark(load_csv(args.input), cfg, variants, flags)
    if args.report:
        write_json(grid.to_dict(), args.report)
    print(grid.table())
    return 0 if all(c.ok for c in grid.cells) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fxhybrid", description="Wavelet-denoised ARNN + ARIMA hybrid forecaster")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic bar CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--bars", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.05)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("denoise", help="wavelet-denoise one price column")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--column", default="close", choices=("open", "high", "low", "close"))
    _add_config_flags(p, training=False)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("features", help="compute the indicator feature matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.add_argument("--denoise-features", action="store_true", dest="denoise_features",
                   help="wavelet-denoise each indicator column")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit the hybrid model and save it to a directory")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, help="output model directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="forecast past the end of a series")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="rolling evaluation on the test split")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--plot", help="SVG plot path")
    p.add_argument("--plot-window", type=int, default=300, dest="plot_window")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="architecture x denoising ablation grid")
    p.add_argument("--input", required=True)
    p.add_argument("--report")
    p.add_argument("--variants", nargs="+", choices=("rnn", "lstm", "arnn", "arnn_arima"))
    p.add_argument("--denoised", choices=("both", "yes", "no"), default="both")
    _add_config_flags(p)
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FxHybridError as exc:
        print(f"fxhybrid: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fxhybrid: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
