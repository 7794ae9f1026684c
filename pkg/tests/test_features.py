import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flicker_ews.features import assemble_channels, linear_resample, rolling_variance, zscore


def naive_rolling_variance(x, w):
    out = np.array([np.var(x[max(0, i - w + 1): i + 1]) for i in range(len(x))])
    out[: w - 1] = out[w - 1]
    return out


class TestRollingVariance:
    def test_hand_values(self):
        v = rolling_variance([0.0, 2.0, 0.0, 4.0], 2)
        assert v.tolist() == [1.0, 1.0, 1.0, 4.0]

    def test_window_one_is_zero(self):
        assert np.all(rolling_variance(np.arange(10.0), 1) == 0.0)

    def test_constant_series(self):
        assert np.allclose(rolling_variance(np.full(50, 3.3), 7), 0.0, atol=1e-25)

    def test_matches_numpy_on_long_series(self):
        x = np.random.default_rng(0).standard_normal(5000) * 3 + 100
        assert np.allclose(rolling_variance(x, 200), naive_rolling_variance(x, 200), rtol=1e-9, atol=1e-9)

    def test_large_offset_stays_accurate(self):
        x = 1e6 + np.random.default_rng(1).standard_normal(20000)
        v = rolling_variance(x, 1000)
        assert np.allclose(v[-1], np.var(x[-1000:]), rtol=1e-6)

    def test_bad_window(self):
        with pytest.raises(ValueError):
            rolling_variance(np.zeros(5), 6)
        with pytest.raises(ValueError):
            rolling_variance(np.zeros(5), 0)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.integers(2, 300), elements=st.floats(-1e3, 1e3)), st.integers(1, 50))
    def test_property_nonnegative_and_exact(self, x, w):
        w = min(w, x.size)
        v = rolling_variance(x, w)
        assert v.shape == x.shape
        assert np.all(v >= 0)
        assert np.allclose(v, naive_rolling_variance(x, w), rtol=1e-7, atol=1e-6)


class TestZscore:
    def test_moments(self):
        z = zscore(np.random.default_rng(2).uniform(0, 9, 1000))
        assert abs(z.mean()) < 1e-12
        assert z.std() == pytest.approx(1.0, abs=1e-12)

    def test_constant_becomes_zero(self):
        assert np.all(zscore(np.full(10, 4.0)) == 0.0)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.integers(2, 200), elements=st.floats(-100, 100)),
           st.floats(0.01, 100), st.floats(-1e3, 1e3))
    def test_affine_invariance(self, x, scale, shift):
        if np.std(x) < 1e-6:
            return
        assert np.allclose(zscore(scale * x + shift), zscore(x), atol=1e-7)


class TestResample:
    def test_identity(self):
        x = np.array([1.0, 5.0, 2.0])
        assert linear_resample(x, 3).tolist() == x.tolist()

    def test_upsample_midpoints(self):
        assert linear_resample([0.0, 2.0], 5).tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]

    def test_linear_function_reproduced(self):
        x = 3.0 * np.arange(101) - 7
        y = linear_resample(x, 37)
        assert np.allclose(y, np.linspace(x[0], x[-1], 37), atol=1e-12)

    def test_endpoints_preserved(self):
        x = np.random.default_rng(4).standard_normal(613)
        y = linear_resample(x, 5000)
        assert y[0] == x[0] and y[-1] == x[-1]


def test_assemble_channels_shapes():
    x = np.random.default_rng(5).standard_normal(400)
    pair = assemble_channels(x, 50)
    stacked = pair.stack()
    assert stacked.shape == (400, 2) and stacked.dtype == np.float32
    assert np.allclose(stacked[:, 1], zscore(rolling_variance(x, 50)), atol=1e-6)
    with pytest.raises(ValueError):
        assemble_channels(x[:10], 50)
