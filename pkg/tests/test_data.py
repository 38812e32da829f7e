import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfkan.data import (
    SeriesDataset,
    gen_periodic,
    gen_toy,
    load_csv,
    read_csv_values,
    save_csv,
    toy_function,
)
from tfkan.training import MinMaxScaler


# ---------------------------------------------------------------------------
# csv ingestion


def test_csv_with_date_column(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("date,load,temp\n2016-07-01,1.0,2.0\n2016-07-02,3.0,4.0\n")
    names, values = read_csv_values(str(path))
    assert names == ["load", "temp"]
    np.testing.assert_array_equal(values, [[1, 2], [3, 4]])


def test_csv_without_date_column(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    names, values = read_csv_values(str(path))
    assert names == ["a", "b"]
    assert values.shape == (2, 2)


def test_csv_nan_cell_is_addressed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1.0,2.0\n3.0,NaN\n")
    with pytest.raises(ValueError, match=r"line 3, column 2"):
        read_csv_values(str(path))


def test_csv_text_cell_is_addressed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1.0,2.0\nx,4.0\n")
    # a non-numeric cell in a column that parsed before is a data error
    with pytest.raises(ValueError, match=r"line 3, column 1"):
        read_csv_values(str(path))


def test_csv_jagged_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1.0,2.0\n3.0\n")
    with pytest.raises(ValueError, match="line 3"):
        read_csv_values(str(path))


def test_csv_needs_header_and_rows(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("a,b\n")
    with pytest.raises(ValueError, match="data row"):
        read_csv_values(str(path))


def test_save_load_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(20, 3)) * 1e3
    path = str(tmp_path / "round.csv")
    save_csv(path, ["x", "y", "z"], values)
    names, back = read_csv_values(path)
    assert names == ["x", "y", "z"]
    np.testing.assert_array_equal(back, values)


# ---------------------------------------------------------------------------
# splits and windows


def test_split_ratio_rounding():
    names, values = gen_periodic(1, 100, seed=0)
    ds = SeriesDataset.from_raw(values, names, 5, 3, ratios=(7, 2, 1))
    assert len(ds.splits["train"]) == 70
    assert len(ds.splits["val"]) == 20
    assert len(ds.splits["test"]) == 10
    assert ds.splits["train"].stop == ds.splits["val"].start
    assert ds.splits["val"].stop == ds.splits["test"].start


def test_sizing_error_names_split():
    names, values = gen_periodic(1, 100, seed=0)
    with pytest.raises(ValueError, match="test split"):
        SeriesDataset.from_raw(values, names, 8, 4, ratios=(7, 2, 1))


def test_window_count_formula():
    names, values = gen_periodic(1, 120, seed=0)
    ds = SeriesDataset.from_raw(values, names, 8, 4, ratios=(1, 1, 1))
    # split length 40 each: 40 - 8 - 4 + 1 = 29
    assert all(ds.window_count(s) == 29 for s in ("train", "val", "test"))


def test_single_window_split():
    names, values = gen_periodic(1, 120, seed=0, periods=[6])
    ds = SeriesDataset.from_raw(values, names, 8, 4, ratios=(8, 1, 1))
    # val split length 12 = 8 + 4 gives exactly one window
    assert ds.window_count("val") == 12 - 8 - 4 + 1 == 1


def test_windows_match_exhaustive_enumeration():
    names, values = gen_periodic(1, 200, seed=1)
    ds = SeriesDataset.from_raw(values, names, 6, 3, ratios=(1, 8, 1))
    split = ds.splits["train"]  # length 20
    expected = [
        (s, s + 6)
        for s in range(split.start, split.stop)
        if s + 6 + 3 <= split.stop
    ]
    assert ds.window_count("train") == len(expected) == 20 - 6 - 3 + 1
    for i, (a, mid) in enumerate(expected):
        x, y = ds.window("train", i)
        np.testing.assert_array_equal(x, ds.values[a:mid].T)
        np.testing.assert_array_equal(y, ds.values[mid : mid + 3].T)


def test_first_window_target_starts_at_lookback():
    names, values = gen_periodic(2, 150, seed=2)
    ds = SeriesDataset.from_raw(values, names, 10, 2)
    _, y = ds.window("train", 0)
    np.testing.assert_array_equal(y, ds.values[10:12].T)


def test_windows_are_exact_continuations():
    names, values = gen_periodic(2, 150, seed=3)
    ds = SeriesDataset.from_raw(values, names, 10, 4)
    for i in (0, 5, ds.window_count("train") - 1):
        x, y = ds.window("train", i)
        start = ds.splits["train"].start + i
        joined = np.concatenate([x, y], axis=1)
        np.testing.assert_array_equal(joined, ds.values[start : start + 14].T)


def test_window_out_of_range():
    names, values = gen_periodic(1, 150, seed=0)
    ds = SeriesDataset.from_raw(values, names, 10, 4)
    with pytest.raises(ValueError, match="out of range"):
        ds.window("test", ds.window_count("test"))


def test_no_leakage_scaler_uses_training_rows_only():
    t = np.arange(100.0)
    values = t[:, None]  # strictly increasing, so the test range exceeds train
    ds = SeriesDataset.from_raw(values, ["up"], 5, 3, ratios=(7, 2, 1))
    train_rows = ds.values[ds.splits["train"].start : ds.splits["train"].stop]
    assert train_rows.min() == 0.0 and train_rows.max() == 1.0
    assert ds.values[ds.splits["test"].start :].max() > 1.0  # transformed, not refit


@given(
    total=st.integers(min_value=60, max_value=400),
    lookback=st.integers(min_value=2, max_value=12),
    horizon=st.integers(min_value=1, max_value=6),
)
@settings(max_examples=40, deadline=None)
def test_window_counts_property(total, lookback, horizon):
    names, values = gen_periodic(1, total, seed=0, periods=[7])
    try:
        ds = SeriesDataset.from_raw(values, names, lookback, horizon)
    except ValueError:
        smallest = min(
            total * 7 // 10, total * 2 // 10,
            total - total * 7 // 10 - total * 2 // 10,
        )
        assert smallest < lookback + horizon
        return
    for split in ("train", "val", "test"):
        expected = len(ds.splits[split]) - lookback - horizon + 1
        assert ds.window_count(split) == max(0, expected)


def test_with_scaler_uses_given_statistics():
    names, values = gen_periodic(1, 120, seed=4)
    scaler = MinMaxScaler().fit(values * 2.0)
    ds = SeriesDataset.with_scaler(values, names, scaler, 8, 4, ratios=(6, 2, 2))
    np.testing.assert_allclose(ds.values, scaler.transform(values), atol=0)


# ---------------------------------------------------------------------------
# toy functions


def test_toy_hand_values():
    assert abs(toy_function("F1", np.array(0.25)) - 0.5) < 1e-12
    assert abs(toy_function("F2", np.array(0.0)) - 0.3) < 1e-12
    assert abs(toy_function("F4", np.array(0.0)) - 1.8660254037844386) < 1e-12


def test_gen_toy_exact_targets_without_noise():
    x, y = gen_toy("F3", 64)
    np.testing.assert_array_equal(y, toy_function("F3", x))
    assert x[0] == 0.0 and x[-1] == 1.0
    with pytest.raises(ValueError, match="unknown toy function"):
        gen_toy("F9", 8)
    with pytest.raises(ValueError, match="count"):
        gen_toy("F1", 0)


def test_gen_toy_noise_is_seeded():
    _, y1 = gen_toy("F1", 32, noise=0.1, seed=3)
    _, y2 = gen_toy("F1", 32, noise=0.1, seed=3)
    np.testing.assert_array_equal(y1, y2)


# ---------------------------------------------------------------------------
# synthetic generator


def test_periodic_single_channel_is_exactly_periodic():
    period = 12
    _, values = gen_periodic(1, 120, periods=[period], trend=0.0, noise=0.0, seed=5)
    series = values[:, 0]
    np.testing.assert_array_equal(series[:-period], series[period:])


def test_periodic_same_seed_same_data():
    a = gen_periodic(3, 200, seed=11)[1]
    b = gen_periodic(3, 200, seed=11)[1]
    np.testing.assert_array_equal(a, b)
    c = gen_periodic(3, 200, seed=12)[1]
    assert not np.array_equal(a, c)


def test_periodic_spectrum_peaks_at_expected_bin():
    period = 16
    window = 128  # integer number of periods
    _, values = gen_periodic(1, 256, periods=[period], trend=0.0, noise=0.0, seed=6)
    spectrum = np.abs(np.fft.rfft(values[:window, 0]))
    assert spectrum.argmax() == window // period


def test_periodic_rejects_short_series():
    with pytest.raises(ValueError, match="exceed"):
        gen_periodic(1, 50, periods=[96])


def test_load_csv_end_to_end(tmp_path):
    names, values = gen_periodic(3, 150, seed=7)
    path = str(tmp_path / "series.csv")
    save_csv(path, names, values)
    ds = load_csv(path, lookback=8, horizon=4, ratios=(6, 2, 2))
    assert ds.n_channels == 3
    assert ds.names == names
    assert ds.window_count("train") == 90 - 8 - 4 + 1
