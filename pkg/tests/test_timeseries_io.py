import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxhybrid.errors import DataError
from fxhybrid.synthetic import synthetic_bars
from fxhybrid.timeseries_io import (
    Bar,
    BarSeries,
    MinMaxScaler,
    SplitSpec,
    apply_minmax,
    chronological_split,
    fit_minmax,
    invert_minmax,
    load_csv,
    make_windows,
    parse_timestamp,
    write_csv,
)

HEADER = "timestamp,open,high,low,close,volume\n"


def _write(tmp_path, body, name="bars.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


def test_load_three_rows(tmp_path):
    p = _write(tmp_path, "0,1.0,1.2,0.9,1.1,10\n300,1.1,1.3,1.0,1.2,5\n600,1.2,1.2,1.1,1.15,0\n")
    s = load_csv(p)
    assert len(s) == 3
    assert s.interval_seconds == 300
    assert s[1] == Bar(300, 1.1, 1.3, 1.0, 1.2, 5.0)


def test_load_iso_timestamps(tmp_path):
    p = _write(tmp_path, "2019-01-01T00:00:00Z,1,1,1,1,0\n2019-01-01 00:05:00,1,1,1,1,0\n")
    s = load_csv(p)
    assert s.timestamp.tolist() == [1546300800, 1546301100]


def test_low_above_high_names_line(tmp_path):
    p = _write(tmp_path, "0,1,1.2,0.9,1.1,1\n300,1,0.8,1.3,1.0,1\n")
    with pytest.raises(DataError, match="line.*3"):
        load_csv(p)


def test_malformed_row_reports_line(tmp_path):
    p = _write(tmp_path, "0,1,1.2,0.9,1.1,1\n300,1,abc,0.9,1.0,1\n")
    with pytest.raises(DataError, match=":3:"):
        load_csv(p)


def test_non_monotonic_timestamps(tmp_path):
    p = _write(tmp_path, "300,1,1,1,1,1\n0,1,1,1,1,1\n")
    with pytest.raises(DataError, match="timestamp"):
        load_csv(p)


def test_missing_file_and_bad_header(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv")
    p = tmp_path / "h.csv"
    p.write_text("time,o,h,l,c,v\n0,1,1,1,1,1\n")
    with pytest.raises(DataError, match="header"):
        load_csv(p)


def test_csv_round_trip(tmp_path):
    s = synthetic_bars(200, seed=3)
    write_csv(s, tmp_path / "x.csv")
    back = load_csv(tmp_path / "x.csv")
    for c in ("timestamp", "open", "high", "low", "close", "volume"):
        np.testing.assert_array_equal(getattr(back, c), getattr(s, c))


def test_gaps_allowed_duplicates_not():
    ts = np.array([0, 300, 900])
    BarSeries(ts, [1] * 3, [1] * 3, [1] * 3, [1] * 3, [0] * 3, 300)
    with pytest.raises(DataError):
        BarSeries(np.array([0, 300, 300]), [1] * 3, [1] * 3, [1] * 3, [1] * 3, [0] * 3, 300)
    with pytest.raises(DataError, match="grid"):
        BarSeries(np.array([0, 300, 450]), [1] * 3, [1] * 3, [1] * 3, [1] * 3, [0] * 3, 300)


def test_bar_violations():
    assert Bar(0, 1, 2, 0.5, 1.5, 1).violations() == []
    assert Bar(0, 1, 0.9, 0.5, 1.5, 1).violations()
    assert Bar(0, 1, 2, 0.5, 1.5, -1).violations()


def test_parse_timestamp_epoch_and_iso():
    assert parse_timestamp("1546300800") == 1546300800
    assert parse_timestamp("2019-01-01T00:00:00+00:00") == 1546300800


def test_split_sizes_100():
    train, val, test = chronological_split(np.arange(100))
    assert (len(train), len(val), len(test)) == (60, 15, 25)


def test_split_75000_test_size():
    assert SplitSpec().sizes(75_000)[2] == 18_750


def test_split_rejects_bad_fraction_and_short_series():
    with pytest.raises(DataError):
        SplitSpec(test_fraction=0)
    with pytest.raises(DataError):
        chronological_split(np.arange(9))


@given(st.integers(10, 5000), st.floats(0.05, 0.6), st.floats(0.05, 0.6))
@settings(max_examples=60, deadline=None)
def test_split_is_chronological_partition(n, tf, vf):
    spec = SplitSpec(tf, vf)
    try:
        tr, va, te = chronological_split(np.arange(n), spec)
    except DataError:
        return
    assert np.array_equal(np.concatenate([tr, va, te]), np.arange(n))
    assert tr.max() < va.min() < te.min()


def test_split_bar_series_timestamps():
    s = synthetic_bars(400)
    tr, va, te = chronological_split(s)
    assert tr.timestamp.max() < va.timestamp.min() < te.timestamp.min()
    assert isinstance(te, BarSeries)


def test_minmax_examples():
    sc = fit_minmax(np.array([[0.0], [5.0], [10.0]]))
    assert sc.x_min[0] == 0 and sc.x_max[0] == 10
    np.testing.assert_array_equal(apply_minmax(sc, np.array([0.0, 5.0, 10.0])), [0, 0.5, 1])
    assert apply_minmax(sc, np.array([12.0]))[0] == pytest.approx(1.2)


def test_minmax_degenerate_and_independent_columns():
    x = np.array([[7.0, 0.0], [7.0, 2.0], [7.0, 4.0]])
    sc = fit_minmax(x)
    assert sc.degenerate.tolist() == [True, False]
    out = apply_minmax(sc, x)
    np.testing.assert_array_equal(out[:, 0], 0.0)
    np.testing.assert_array_equal(out[:, 1], [0, 0.5, 1])


def test_minmax_errors():
    with pytest.raises(DataError):
        fit_minmax(np.array([[1.0]]))
    with pytest.raises(DataError):
        invert_minmax(MinMaxScaler(), [0.5])
    sc = fit_minmax(np.zeros((3, 2)) + np.arange(3)[:, None])
    with pytest.raises(DataError):
        apply_minmax(sc, np.zeros((2, 3)))


def test_invert_minmax_examples():
    sc = MinMaxScaler(np.array([100.0]), np.array([110.0]))
    assert invert_minmax(sc, [0.5])[0] == 105
    assert invert_minmax(sc, [0.0])[0] == 100


@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=50))
@settings(max_examples=80, deadline=None)
def test_minmax_round_trip(values):
    y = np.array(values)
    sc = fit_minmax(y)
    if sc.degenerate[0]:
        return
    back = invert_minmax(sc, apply_minmax(sc, y))
    assert np.max(np.abs(back - y)) <= 1e-12 * max(1.0, np.max(np.abs(y)))


def test_scaler_ignores_test_rows():
    s = synthetic_bars(400)
    tr, _, te = chronological_split(np.asarray(s.close))
    a = fit_minmax(tr)
    te2 = te + 1000
    b = fit_minmax(chronological_split(np.concatenate([s.close[:len(s) - len(te)], te2]))[0])
    assert a.x_min.tobytes() == b.x_min.tobytes() and a.x_max.tobytes() == b.x_max.tobytes()


def test_make_windows_counts_and_alignment():
    X = np.arange(12.0)[:, None] * np.ones((1, 3))
    y = np.arange(12.0) * 10
    ds = make_windows(X, y, y, T=10, horizon=1)
    assert len(ds) == 2
    assert ds.X.shape == (2, 10, 3) and ds.Z.shape == (2, 10, 1)
    np.testing.assert_array_equal(ds.Y, [100, 110])
    np.testing.assert_array_equal(ds.X[1, :, 0], np.arange(1, 11))
    with pytest.raises(DataError):
        make_windows(X[:10], y[:10], y[:10], T=10, horizon=1)


@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 5))
@settings(max_examples=50, deadline=None)
def test_windows_target_after_inputs_and_shift(T, h, k):
    n = 30
    X = np.arange(n, dtype=float)[:, None]
    ds = make_windows(X, X, X[:, 0], T, h)
    assert len(ds) == n - T - h + 1
    # label row is exactly h steps after the last input row
    assert np.all(ds.Y - ds.X[:, -1, 0] == h)
    shifted = make_windows(X[k:], X[k:], X[k:, 0], T, h)
    np.testing.assert_array_equal(shifted.target_rows + k, ds.target_rows[k:])
