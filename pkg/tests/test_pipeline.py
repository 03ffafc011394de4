import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fxhybrid import metrics
from fxhybrid.config import PipelineConfig, load_config
from fxhybrid.errors import ConfigError, DataError
from fxhybrid.pipeline import (
    PreparedData,
    evaluate,
    evaluate_prepared,
    fit_hybrid,
    fit_prepared,
    load_model,
    max_level,
    predict_next,
    prepare_data,
    run_benchmark,
    save_model,
    window_splits,
)
from fxhybrid.report import REPORT_SCHEMA, write_json
from fxhybrid.synthetic import synthetic_bars

TINY = dict(encoder_layers=(8,), decoder_layers=(8,), step_feature_dim=4, head_rnn_width=6,
            head_dense=(4, 1), epochs=3, batch_size=32, T=5)


@pytest.fixture(scope="module")
def bars():
    return synthetic_bars(800, seed=1)


@pytest.fixture(scope="module")
def cfg():
    return PipelineConfig(**TINY)


@pytest.fixture(scope="module")
def fitted(bars, cfg):
    return fit_hybrid(bars, cfg)


# ---- metric oracles ----

def test_rmse_examples():
    assert metrics.rmse([1, 2, 3], [1, 2, 3]) == 0
    assert abs(metrics.rmse([1, 2], [2, 4]) - math.sqrt(2.5)) < 1e-12


def test_mape_examples():
    assert abs(metrics.mape([110], [100]) - 10.0) < 1e-12
    assert metrics.mape([5, 6], [5, 6]) == 0
    assert abs(metrics.mape([90, 110], [100, 100]) - 10.0) < 1e-12
    with pytest.raises(DataError):
        metrics.mape([1.0], [0.0])
    assert metrics.all_metrics([1.0, 2.0], [0.0, 1.0])["mape_percent"] is None


def test_da_examples():
    assert metrics.directional_accuracy([1, 2, 1, 3], [1, 2, 1, 3]) == 1.0
    assert metrics.directional_accuracy([1, 0, 3], [1, 2, 1]) == 0.0
    # flat truth: the first factor is 0 so every step counts as a hit
    assert metrics.directional_accuracy([1, 7], [1, 1]) == 1.0
    assert metrics.directional_accuracy([1, -7], [1, 1]) == 1.0
    with pytest.raises(DataError):
        metrics.directional_accuracy([1.0], [1.0])


def test_residual_and_combine_examples():
    np.testing.assert_array_equal(metrics.residual_series([2, 3], [1, 1]), [1, 2])
    np.testing.assert_array_equal(metrics.residual_series([2, 3], [2, 3]), [0, 0])
    np.testing.assert_array_equal(metrics.combine([1.0], [0.5]), [1.5])
    np.testing.assert_array_equal(metrics.combine([1.0, 2.0], [0, 0]), [1.0, 2.0])
    with pytest.raises(DataError):
        metrics.combine([1.0], [1.0, 2.0])


prices = arrays(np.float64, st.integers(2, 40), elements=st.floats(50, 200))


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(60, 110)), st.data())
@settings(max_examples=60, deadline=None)
def test_combine_inverts_residual_bitwise(y, data):
    # within a factor of 2 the subtraction is exact (Sterbenz), so the round trip is bitwise
    yh = data.draw(arrays(np.float64, y.shape, elements=st.floats(60, 110)))
    np.testing.assert_array_equal(metrics.combine(yh, metrics.residual_series(y, yh)), y)


@given(prices, st.data())
@settings(max_examples=60, deadline=None)
def test_combine_inverts_residual_to_one_ulp(y, data):
    yh = data.draw(arrays(np.float64, y.shape, elements=st.floats(50, 200)))
    back = metrics.combine(yh, metrics.residual_series(y, yh))
    assert np.all(np.abs(back - y) <= np.spacing(np.maximum(np.abs(y), np.abs(yh))))


@given(prices, st.data())
@settings(max_examples=60, deadline=None)
def test_metric_bounds(y, data):
    yh = data.draw(arrays(np.float64, y.shape, elements=st.floats(50, 200)))
    assert metrics.rmse(yh, y) >= 0
    assert metrics.mape(yh, y) >= 0
    assert 0 <= metrics.directional_accuracy(yh, y) <= 1
    assert metrics.directional_accuracy(y, y) == 1.0
    assert (metrics.rmse(yh, y) == 0) == bool(np.all(yh == y))


# ---- config ----

def test_config_round_trip_and_errors(tmp_path):
    c = PipelineConfig(**TINY)
    assert PipelineConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigError, match="unknown"):
        PipelineConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        PipelineConfig(wavelet="nope")
    with pytest.raises(ConfigError):
        PipelineConfig(denoise_order="sideways")
    p = tmp_path / "c.yaml"
    p.write_text("epochs: 7\nwavelet: db4\n")
    assert load_config(p).epochs == 7
    q = tmp_path / "c.json"
    q.write_text(json.dumps({"T": 3}))
    assert load_config(q).T == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)


# ---- data preparation ----

def test_prepared_data_shapes(bars, cfg):
    data = prepare_data(bars, cfg)
    n = len(bars) - data.warmup
    assert data.features.shape == (n, 16)
    assert sum(data.bounds) == n
    assert data.target.shape == (n,)
    assert data.warmup == 43


def test_test_block_never_touches_training_statistics(bars, cfg):
    # perturbing test-period bars leaves the training block and its scalers alone
    data = prepare_data(bars, cfg)
    close = np.array(bars.close)
    cut = len(bars) - data.bounds[2] + 50
    from fxhybrid.timeseries_io import BarSeries

    shifted = BarSeries(bars.timestamp, bars.open[:cut].tolist() + list(np.array(bars.open[cut:]) + 5),
                        bars.high[:cut].tolist() + list(np.array(bars.high[cut:]) + 5),
                        bars.low[:cut].tolist() + list(np.array(bars.low[cut:]) + 5),
                        close[:cut].tolist() + list(close[cut:] + 5), bars.volume, bars.interval_seconds)
    other = prepare_data(shifted, cfg)
    tr = data.segment("train")
    np.testing.assert_array_equal(data.features[tr], other.features[tr])
    np.testing.assert_array_equal(data.target[tr], other.target[tr])
    a, b = window_splits(data, cfg), window_splits(other, cfg)
    assert a.feature_scaler.x_max.tobytes() == b.feature_scaler.x_max.tobytes()


def test_no_denoise_keeps_raw_close(bars, cfg):
    data = prepare_data(bars, cfg.with_overrides(denoise=False))
    np.testing.assert_array_equal(data.target, data.raw_close)
    den = prepare_data(bars, cfg)
    assert not np.array_equal(den.target, den.raw_close)


def test_denoise_orders_and_full_series(bars, cfg):
    for over in ({"denoise_order": "prices"}, {"denoise_full_series": True}):
        d = prepare_data(bars, cfg.with_overrides(**over))
        assert np.all(np.isfinite(d.features))


def test_three_decoder_channels(bars, cfg, tmp_path):
    c3 = cfg.with_overrides(exo_channels=3, epochs=1)
    data = prepare_data(bars, c3)
    assert data.n_exo == 3 and data.extra_exo.shape == (data.target.shape[0], 2)
    s = window_splits(data, c3)
    assert s.train.Z.shape[2] == 3
    model = fit_prepared(data, c3)
    assert model.arnn.architecture.n_exo == 3
    save_model(model, tmp_path / "m3")
    assert np.isfinite(predict_next(load_model(tmp_path / "m3"), bars)["hybrid"])
    with pytest.raises(ConfigError):
        cfg.with_overrides(exo_channels=2)


def test_max_level():
    assert max_level(29, "sym15") == 0
    assert max_level(30, "sym15") == 1
    assert max_level(1024, "sym15") >= 4


def test_windows_respect_split_boundaries(bars, cfg):
    data = prepare_data(bars, cfg)
    s = window_splits(data, cfg)
    a, b, _ = data.bounds
    assert s.train.target_rows.max() < a
    assert s.val.target_rows.min() >= a + cfg.T and s.val.target_rows.max() < a + b
    assert s.test.target_rows.min() >= a + b + cfg.T


# ---- fit / evaluate ----

def test_fit_produces_ar3_residual_model(fitted):
    assert fitted.residual_model is not None
    assert fitted.residual_model.order.p == 3
    assert set(fitted.provenance) == {"train_data_sha256", "arnn_sha256", "train_residuals_sha256"}


def test_report_is_self_consistent(fitted, bars):
    rep = evaluate(fitted, bars)
    again = rep.recompute_metrics()
    for k, m in rep.metrics.items():
        for name, v in m.items():
            if v is None:
                assert again[k][name] is None
            else:
                assert abs(again[k][name] - v) <= 1e-12
    np.testing.assert_array_equal(rep.y_pred, rep.y_arnn + rep.r_hat)


def test_report_matches_schema(fitted, bars, tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    rep = evaluate(fitted, bars)
    write_json(rep.to_dict(), tmp_path / "r.json")
    jsonschema.validate(json.loads((tmp_path / "r.json").read_text()), REPORT_SCHEMA)


def test_no_arima_equals_pure_network(bars, cfg, fitted):
    data = prepare_data(bars, cfg)
    pure = fit_prepared(data, cfg.with_overrides(use_arima=False), fitted.arnn)
    assert pure.residual_model is None
    rep = evaluate_prepared(pure, data)
    np.testing.assert_array_equal(rep.r_hat, 0)
    np.testing.assert_array_equal(rep.y_pred, rep.y_arnn)
    assert rep.metrics["hybrid"] == rep.metrics["arnn"]
    full = evaluate_prepared(fitted, data)
    np.testing.assert_array_equal(full.y_arnn, rep.y_arnn)


def test_same_seed_same_metrics(bars, cfg, fitted):
    again = fit_hybrid(bars, cfg)
    assert evaluate(again, bars).metrics == evaluate(fitted, bars).metrics


def test_model_save_load(fitted, bars, tmp_path):
    save_model(fitted, tmp_path / "m")
    back = load_model(tmp_path / "m")
    assert evaluate(back, bars).metrics == evaluate(fitted, bars).metrics
    out = predict_next(back, bars)
    assert out["timestamp"] == int(bars.timestamp[-1]) + 300
    assert out["hybrid"] == pytest.approx(out["arnn"] + out["residual"])


def test_tampered_weights_rejected(fitted, tmp_path):
    save_model(fitted, tmp_path / "m")
    w = tmp_path / "m" / "arnn.weights"
    blob = bytearray(w.read_bytes())
    blob[100] ^= 1
    w.write_bytes(bytes(blob))
    with pytest.raises(DataError):
        load_model(tmp_path / "m")


def test_singular_residuals_fall_back_to_zero_forecast():
    n = 400
    feats = np.random.default_rng(0).uniform(size=(n, 2))
    # flat target: every training residual is 0, so the lagged design is singular
    data = PreparedData.from_arrays(feats, np.full(n, 3.0), (240, 60, 100))
    cfg = PipelineConfig(**{**TINY, "epochs": 0, "denoise": False})
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        m = fit_prepared(data, cfg)
    assert m.residual_model is None


def test_one_cell_grid_equals_direct_run(bars, cfg):
    grid = run_benchmark(bars, cfg, variants=("arnn_arima",), denoise_flags=(True,))
    cell = grid.cell("arnn_arima", True)
    assert cell.ok
    direct = evaluate(fit_hybrid(bars, cfg), bars)
    assert cell.report.metrics == direct.metrics


def test_benchmark_records_failures_and_ranks(bars, cfg):
    grid = run_benchmark(bars, cfg.with_overrides(epochs=1), variants=("rnn", "lstm", "arnn", "arnn_arima"),
                         denoise_flags=(False,))
    assert all(c.ok for c in grid.cells)
    r = [c.report.rmse for c in grid.ranked()]
    assert r == sorted(r)
    # arnn and arnn_arima share one network
    np.testing.assert_array_equal(grid.cell("arnn", False).report.y_arnn,
                                  grid.cell("arnn_arima", False).report.y_arnn)
    bad = run_benchmark(synthetic_bars(120, seed=0), cfg, variants=("arnn",), denoise_flags=(True,))
    assert not bad.cells[0].ok and bad.cells[0].error
    assert "FAILED" in bad.table()
