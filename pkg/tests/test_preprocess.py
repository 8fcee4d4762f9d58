import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from blinkflow.errors import ConfigurationError, InsufficientDataError
from blinkflow.ingest import BlinkSeries
from blinkflow.preprocess import (
    BPM,
    WindowConfig,
    bandpass,
    bandpass_kernel,
    detrend,
    gaussian_weights,
    is_uniform,
    moving_average,
    slice_windows,
    taper,
    window_count,
)

from conftest import uniform_series


def _ma_oracle(t, v, width):
    out = np.empty_like(v)
    for i in range(t.size):
        sel = np.abs(t - t[i]) <= width / 2 + 1e-9
        out[i] = v[sel].mean()
    return out


@pytest.mark.parametrize("seed", range(5))
def test_moving_average_matches_loop(seed):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.02, 0.3, 400))
    v = rng.normal(size=400)
    s = BlinkSeries(t, v)
    for width in (0.5, 1.0, 7.3):
        np.testing.assert_allclose(moving_average(s, width).v, _ma_oracle(t, v, width), atol=1e-12)


def test_detrend_constant_is_zero():
    s = uniform_series(30.0, fn=lambda t: np.full_like(t, 0.37))
    assert np.all(detrend(s, 1.0).v == 0.0)


def test_detrend_keeps_linear_interior_at_zero():
    s = uniform_series(30.0, fn=lambda t: 2.0 + 0.5 * t)
    d = detrend(s, 1.0).v
    assert np.max(np.abs(d[10:-10])) < 1e-12


def test_detrend_rejects_bad_width():
    with pytest.raises(ConfigurationError):
        detrend(uniform_series(10.0), 0.0)


@settings(max_examples=50, deadline=None)
@given(
    offset=st.floats(-100, 100),
    width=st.floats(0.2, 20.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_detrend_removes_offsets(offset, width, seed):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.05, 0.2, 200))
    v = rng.normal(size=200)
    a = detrend(BlinkSeries(t, v), width).v
    b = detrend(BlinkSeries(t, v + offset), width).v
    np.testing.assert_allclose(a, b, atol=1e-9 * (1 + abs(offset)))


# -- windows ----------------------------------------------------------------


@pytest.mark.parametrize("duration, n", [(260.0, 200), (61.0, 1), (61.5, 1), (62.0, 2), (120.0, 60)])
def test_window_count(duration, n):
    assert window_count(duration, WindowConfig()) == n


def test_short_series_is_insufficient():
    with pytest.raises(InsufficientDataError):
        slice_windows(uniform_series(60.0), WindowConfig())


def test_windows_of_full_block():
    segs = slice_windows(uniform_series(), WindowConfig())
    assert len(segs) == 200
    assert segs[0].t_center == pytest.approx(30.5)
    assert segs[-1].t_center == pytest.approx(229.5)
    assert all(len(s) == 611 for s in segs)
    assert all(s.t[0] == 0.0 and s.t[-1] == pytest.approx(61.0) for s in segs)


def test_gaussian_weights_shape():
    cfg = WindowConfig()
    t = np.linspace(0, 61, 611)
    w = gaussian_weights(t, cfg)
    assert w.max() == pytest.approx(1.0)
    np.testing.assert_allclose(w, w[::-1], atol=1e-12)
    # one sigma away from the centre the weight is exp(-1/2)
    assert gaussian_weights(np.array([30.5 + 61 / 6]), cfg)[0] == pytest.approx(np.exp(-0.5))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"step_s": 0.0},
        {"step_s": 70.0},
        {"f_lo": 0.5, "f_hi": 0.4},
        {"gaussian_sigma_s": -1.0},
        {"n_freqs": 1},
        {"detrend_s": 0.0},
    ],
)
def test_window_config_errors(kwargs):
    with pytest.raises(ConfigurationError):
        WindowConfig(**kwargs)


def test_nyquist_check():
    with pytest.raises(ConfigurationError):
        bandpass_kernel(0.8, WindowConfig())


# -- bandpass ---------------------------------------------------------------


def test_kernel_response():
    cfg = WindowConfig()
    h = bandpass_kernel(10.0, cfg)
    assert h.size % 2 == 1
    np.testing.assert_array_equal(h, h[::-1])
    # Kaiser's order formula slightly undershoots the requested 40 dB
    ripple = 10 ** (-38 / 20)
    f_pass = np.linspace(3 * BPM, 24 * BPM, 50)
    _, hp = signal.freqz(h, worN=f_pass, fs=10.0)
    assert np.max(np.abs(np.abs(hp) - 1)) <= ripple
    f_stop = np.concatenate((np.linspace(0, 1 * BPM, 10), np.linspace(26 * BPM, 5.0, 100)))
    _, hs = signal.freqz(h, worN=f_stop, fs=10.0)
    assert np.max(np.abs(hs)) <= ripple


def test_bandpass_passes_in_band_sinusoid():
    cfg = WindowConfig()
    f0 = 12 * BPM
    s = uniform_series(61.0, fn=lambda t: 3.0 + np.sin(2 * np.pi * f0 * t))
    seg = bandpass(slice_windows(s, cfg)[0], cfg)
    assert seg.filtered
    mid = slice(150, 460)
    t = seg.t[mid]
    basis = np.column_stack((np.sin(2 * np.pi * f0 * t), np.cos(2 * np.pi * f0 * t), np.ones_like(t)))
    coef, *_ = np.linalg.lstsq(basis, seg.v[mid], rcond=None)
    assert np.hypot(coef[0], coef[1]) == pytest.approx(1.0, abs=0.05)
    assert abs(coef[1]) < 0.05  # no phase shift


def test_bandpass_rejects_slow_drift():
    cfg = WindowConfig()
    s = uniform_series(61.0, fn=lambda t: np.sin(2 * np.pi * 0.2 * BPM * t) + np.sin(2 * np.pi * 2.0 * t))
    seg = bandpass(slice_windows(s, cfg)[0], cfg)
    assert np.max(np.abs(seg.v[150:460])) < 0.05


def test_irregular_window_falls_back_to_mean_removal(rng):
    cfg = WindowConfig()
    t = np.sort(np.concatenate(([0.0, 61.0], rng.uniform(0, 61, 400))))
    s = BlinkSeries(t, rng.normal(5.0, 1.0, t.size))
    seg = bandpass(slice_windows(s, cfg)[0], cfg)
    assert not seg.filtered
    assert seg.weights @ seg.v == pytest.approx(0.0, abs=1e-9)
    tapered = taper(seg)
    np.testing.assert_allclose(tapered.v, seg.v * seg.weights)


def test_is_uniform():
    t = np.arange(100) * 0.1
    assert is_uniform(t)
    jittered = t + np.r_[0, 0.005, np.zeros(98)]
    assert not is_uniform(jittered)
    assert not is_uniform(np.array([0.0, 1.0]))
