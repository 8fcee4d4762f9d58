"""Detrending, sliding Gaussian windows and per-window bandpass filtering."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import ConfigurationError, InsufficientDataError
from .ingest import BlinkSeries

BPM = 1.0 / 60.0  # Hz per blink/min
_TIME_TOL = 1e-9
UNIFORM_JITTER_TOL = 0.01
STOPBAND_DB = 40.0


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window and band settings for spectrogram generation.

    ``detrend_s`` is the moving-average width used on the spectrogram path
    (see :func:`detrend`). The band defaults are 2 and 25 blinks/min.
    """

    win_len_s: float = 61.0
    step_s: float = 1.0
    gaussian_sigma_s: float | None = None
    f_lo: float = 2 * BPM
    f_hi: float = 25 * BPM
    n_freqs: int = 93
    detrend_s: float = 30.0

    def __post_init__(self):
        if self.gaussian_sigma_s is None:
            object.__setattr__(self, "gaussian_sigma_s", self.win_len_s / 6.0)
        if not (self.win_len_s > 0 and 0 < self.step_s <= self.win_len_s):
            raise ConfigurationError("need 0 < step_s <= win_len_s")
        if not 0 < self.f_lo < self.f_hi:
            raise ConfigurationError("need 0 < f_lo < f_hi")
        if not self.gaussian_sigma_s > 0:
            raise ConfigurationError("gaussian_sigma_s must be positive")
        if self.n_freqs < 2:
            raise ConfigurationError("n_freqs must be >= 2")
        if not self.detrend_s > 0:
            raise ConfigurationError("detrend_s must be positive")

    def check_nyquist(self, fs: float) -> None:
        if not self.f_hi < fs / 2:
            raise ConfigurationError(f"f_hi={self.f_hi:g} Hz is not below Nyquist ({fs / 2:g} Hz)")


@dataclass(frozen=True, eq=False)
class WindowSegment:
    """Samples of one window, with ``t`` relative to the window start.

    ``filtered`` is False when the window was irregularly sampled and only
    mean removal was applied instead of the FIR bandpass.
    """

    t_center: float
    t: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    filtered: bool = False

    def __len__(self):
        return self.t.size


def moving_average(series: BlinkSeries, width_s: float) -> BlinkSeries:
    """Centered, time-based moving average.

    Each output sample is the mean of all inputs with ``|t_j - t_i| <= width_s/2``;
    the neighbourhood shrinks at the series edges.
    """
    if not width_s > 0:
        raise ConfigurationError("width_s must be positive")
    t, v = series.t, series.v
    half = width_s / 2 + _TIME_TOL
    lo = np.searchsorted(t, t - half, side="left")
    hi = np.searchsorted(t, t + half, side="right")
    # offsetting by v[0] keeps constant inputs exact through the cumsum
    ref = v[0]
    c = np.concatenate(([0.0], np.cumsum(v - ref)))
    mean = (c[hi] - c[lo]) / (hi - lo) + ref
    return series.with_values(mean)


def detrend(series: BlinkSeries, width_s: float = 1.0) -> BlinkSeries:
    """Remove baseline wander: raw minus its moving average."""
    return series.with_values(series.v - moving_average(series, width_s).v)


def gaussian_weights(t_rel: np.ndarray, cfg: WindowConfig) -> np.ndarray:
    c = cfg.win_len_s / 2
    return np.exp(-((t_rel - c) ** 2) / (2 * cfg.gaussian_sigma_s**2))


def window_count(duration: float, cfg: WindowConfig) -> int:
    if duration + _TIME_TOL < cfg.win_len_s:
        return 0
    return int(math.floor((duration - cfg.win_len_s) / cfg.step_s + _TIME_TOL)) + 1


def slice_windows(series: BlinkSeries, cfg: WindowConfig) -> list[WindowSegment]:
    n = window_count(series.duration, cfg)
    if n == 0:
        raise InsufficientDataError(
            f"series lasts {series.duration:g} s, shorter than one {cfg.win_len_s:g} s window"
        )
    t0 = series.t[0]
    starts = t0 + cfg.step_s * np.arange(n)
    lo = np.searchsorted(series.t, starts - _TIME_TOL, side="left")
    hi = np.searchsorted(series.t, starts + cfg.win_len_s + _TIME_TOL, side="right")
    segments = []
    for start, a, b in zip(starts, lo, hi):
        t_rel = np.clip(series.t[a:b] - start, 0.0, cfg.win_len_s)
        segments.append(
            WindowSegment(
                t_center=float(start + cfg.win_len_s / 2),
                t=t_rel,
                v=series.v[a:b].copy(),
                weights=gaussian_weights(t_rel, cfg),
            )
        )
    return segments


def is_uniform(t: np.ndarray, tol: float = UNIFORM_JITTER_TOL) -> bool:
    if t.size < 3:
        return False
    dt = np.diff(t)
    med = np.median(dt)
    return bool(med > 0 and np.all(np.abs(dt - med) <= tol * med))


_fir_cache: dict = {}


def bandpass_kernel(fs: float, cfg: WindowConfig) -> np.ndarray:
    """Kaiser windowed-sinc bandpass with transition width ``f_lo``."""
    key = (round(fs, 9), cfg.f_lo, cfg.f_hi)
    if key not in _fir_cache:
        cfg.check_nyquist(fs)
        numtaps, beta = signal.kaiserord(STOPBAND_DB, cfg.f_lo / (fs / 2))
        numtaps |= 1  # odd length -> integer group delay, type I
        _fir_cache[key] = signal.firwin(
            numtaps, [cfg.f_lo, cfg.f_hi], pass_zero=False, window=("kaiser", beta), fs=fs
        )
    return _fir_cache[key]


def _odd_extend(x: np.ndarray, n: int) -> np.ndarray:
    n_ref = min(n, x.size - 1)
    left = 2 * x[0] - x[n_ref:0:-1]
    right = 2 * x[-1] - x[-2 : -n_ref - 2 : -1]
    pad = n - n_ref
    return np.concatenate((np.zeros(pad), left, x, right, np.zeros(pad)))


def _weighted_demean(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = w.sum()
    return v - (w @ v) / sw if sw > 0 else v - v.mean()


def bandpass(segment: WindowSegment, cfg: WindowConfig) -> WindowSegment:
    """Zero-phase FIR bandpass for uniform windows, mean removal otherwise.

    The symmetric kernel is applied once by centred convolution over an
    odd-reflected extension of the window, so the kernel may be longer than
    the window itself. In both branches the Gaussian-weighted mean is removed
    afterwards.
    """
    v = segment.v
    if is_uniform(segment.t):
        fs = 1.0 / np.median(np.diff(segment.t))
        h = bandpass_kernel(fs, cfg)
        half = h.size // 2
        x = v - v.mean()
        y = signal.fftconvolve(_odd_extend(x, half), h, mode="valid")
        return replace(segment, v=_weighted_demean(y, segment.weights), filtered=True)
    return replace(segment, v=_weighted_demean(v, segment.weights), filtered=False)


def taper(segment: WindowSegment) -> WindowSegment:
    return replace(segment, v=segment.v * segment.weights)
