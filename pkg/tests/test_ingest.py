import numpy as np
import pytest

from flicker_ews.errors import DataError
from flicker_ews.ingest import EmpiricalSeries, load_csv, regularize


def write(path, text):
    path.write_text(text)
    return path


def test_basic_forward_time(tmp_path):
    s = load_csv(write(tmp_path / "a.csv", "t,temp\n0,36.5\n1,36.0\n2,35.1\n"), "t", "temp")
    assert s.timestamps.tolist() == [0, 1, 2]
    assert s.values.tolist() == [36.5, 36.0, 35.1]
    assert s.direction == "timeForward" and s.dropped == 0


def test_age_axis_reversed(tmp_path):
    s = load_csv(write(tmp_path / "core.csv", "age_kyr,K\n30,1.5\n20,2.5\n10,0.5\n"), "age_kyr", "K")
    assert s.direction == "timeReversed"
    assert s.timestamps.tolist() == [-30, -20, -10]
    assert s.values.tolist() == [1.5, 2.5, 0.5]
    assert s.ages.tolist() == [30, 20, 10]


def test_explicit_age_flag_overrides_name(tmp_path):
    s = load_csv(write(tmp_path / "a.csv", "depth,K\n3,1\n1,2\n"), "depth", "K", age_axis=True)
    assert s.direction == "timeReversed" and s.values.tolist() == [1.0, 2.0]


def test_bad_rows_dropped_and_duplicates_averaged(tmp_path):
    text = "t;v\n0;1\n1;NA\n2;3\nx;4\n2;5\n"
    s = load_csv(write(tmp_path / "a.csv", text), "t", "v")
    assert s.dropped == 2
    assert s.timestamps.tolist() == [0, 2]
    assert s.values.tolist() == [1.0, 4.0]


def test_datetime_axis(tmp_path):
    text = "when,temp\n2020-01-01 00:00,36\n2020-01-01 00:30,35\n2020-01-01 02:00,34\n"
    s = load_csv(write(tmp_path / "a.csv", text), "when", "temp", datetime_axis=True)
    assert s.timestamps.tolist() == [0.0, 0.5, 2.0]


@pytest.mark.parametrize("text,cols", [
    ("t,v\n0,1\n", ("t", "v")),
    ("t,v\n0,1\n1,2\n", ("t", "w")),
    ("t,v\n0,1\n0,2\n", ("t", "v")),
    ("t,v\na,1\nb,2\n", ("t", "v")),
])
def test_errors(tmp_path, text, cols):
    with pytest.raises(DataError):
        load_csv(write(tmp_path / "a.csv", text), *cols)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "none.csv", "t", "v")


class TestRegularize:
    def test_linear_record_exact(self):
        t = np.array([0.0, 1.0, 3.0, 10.0])
        s = EmpiricalSeries(t, 2 * t + 1)
        y = regularize(s, 11)
        assert np.allclose(y, 2 * np.arange(11.0) + 1, atol=1e-12)

    def test_even_record_unchanged(self):
        s = EmpiricalSeries(np.arange(5.0), np.array([3.0, 1.0, 4.0, 1.0, 5.0]))
        assert regularize(s, 5).tolist() == [3.0, 1.0, 4.0, 1.0, 5.0]

    def test_endpoints_and_length(self):
        rng = np.random.default_rng(0)
        t = np.cumsum(rng.uniform(0.1, 2.0, 300))
        s = EmpiricalSeries(t, rng.standard_normal(300))
        y = regularize(s, 100_000)
        assert y.size == 100_000 and y[0] == s.values[0] and y[-1] == s.values[-1]

    def test_bad_length(self):
        with pytest.raises(ValueError):
            regularize(EmpiricalSeries([0.0, 1.0], [0.0, 1.0]), 1)

    def test_series_validation(self):
        with pytest.raises(DataError):
            EmpiricalSeries([1.0, 0.0], [0.0, 1.0])
