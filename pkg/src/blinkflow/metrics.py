"""Blink Rate, Blink Duration and Blink Entropy."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .ingest import BlinkSeries
from .preprocess import detrend

# threshold floor relative to the peak, keeps round-off in flat stretches of
# a noiseless signal from opening events
_PEAK_FLOOR = 1e-6


@dataclass(frozen=True)
class BlinkEvent:
    onset_t: float
    offset_t: float

    def __post_init__(self):
        if not self.offset_t > self.onset_t:
            raise InvalidInputError("blink offset must come after onset")

    @property
    def duration(self) -> float:
        return self.offset_t - self.onset_t


@dataclass(frozen=True)
class DetectorConfig:
    threshold_scale: float = 4.0
    hysteresis_frac: float = 0.5
    min_gap_s: float = 0.2

    def __post_init__(self):
        if not self.threshold_scale > 0:
            raise ConfigurationError("threshold_scale must be positive")
        if not 0 < self.hysteresis_frac < 1:
            raise ConfigurationError("hysteresis_frac must lie in (0, 1)")
        if not self.min_gap_s >= 0:
            raise ConfigurationError("min_gap_s must be >= 0")


@dataclass(frozen=True)
class MetricVector:
    br: float
    bd: float
    be: float
    bd_median: float = 0.0
    n_blinks: int = 0
    no_blinks: bool = False

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.br, self.bd, self.be)


def _crossing(t0, v0, t1, v1, level):
    if v1 == v0:
        return t1
    return t0 + (level - v0) * (t1 - t0) / (v1 - v0)


def detect_blinks(series: BlinkSeries, cfg: DetectorConfig | None = None) -> list[BlinkEvent]:
    """Hysteresis threshold detector on a detrended ratio signal.

    Blinks are upward excursions above the median. An event opens when the
    signal rises above ``threshold_scale * MAD`` and closes once it drops
    below ``hysteresis_frac`` of that level; crossing times are linearly
    interpolated between samples. Events separated by less than
    ``min_gap_s`` are merged.
    """
    cfg = cfg or DetectorConfig()
    t, v = series.t, series.v
    x = v - np.median(v)
    mad = np.median(np.abs(x))
    peak = x.max()
    if peak <= 0:
        return []
    on = max(cfg.threshold_scale * mad, _PEAK_FLOOR * peak)
    off = cfg.hysteresis_frac * on

    raw = []
    active = False
    start = 0.0
    above = x > on
    below = x < off
    for i in range(x.size):
        if not active and above[i]:
            active = True
            start = t[i] if i == 0 else _crossing(t[i - 1], x[i - 1], t[i], x[i], on)
        elif active and below[i]:
            active = False
            end = _crossing(t[i - 1], x[i - 1], t[i], x[i], off)
            raw.append([start, max(end, np.nextafter(start, np.inf))])
    if active:
        raw.append([start, max(t[-1], np.nextafter(start, np.inf))])

    merged: list[list[float]] = []
    for ev in raw:
        if merged and ev[0] - merged[-1][1] < cfg.min_gap_s:
            merged[-1][1] = ev[1]
        else:
            merged.append(ev)
    return [BlinkEvent(float(a), float(b)) for a, b in merged]


def blink_rate(events, observed_duration_s: float) -> float:
    """Blinks per minute."""
    if not observed_duration_s > 0:
        raise InvalidInputError("observed duration must be positive")
    return 60.0 * len(events) / observed_duration_s


def blink_duration(events, aggregate: str = "mean") -> tuple[float, bool]:
    """Mean (or median) event length in seconds, and an empty-list flag."""
    if not events:
        return 0.0, True
    d = np.array([e.offset_t - e.onset_t for e in events])
    if aggregate == "mean":
        return float(d.mean()), False
    if aggregate == "median":
        return float(np.median(d)), False
    raise ConfigurationError(f"unknown aggregate {aggregate!r}")


def histogram_counts(x: np.ndarray, n_bins: int) -> np.ndarray:
    """Counts over ``n_bins`` equal bins spanning [min, max], top edge inclusive."""
    x = np.asarray(x, dtype=float).ravel()
    lo, hi = x.min(), x.max()
    if hi == lo:
        counts = np.zeros(n_bins, dtype=np.int64)
        counts[0] = x.size
        return counts
    idx = np.floor((x - lo) / (hi - lo) * n_bins).astype(np.int64)
    np.clip(idx, 0, n_bins - 1, out=idx)
    return np.bincount(idx, minlength=n_bins)


def blink_entropy(sp, n_bins: int = 256) -> float:
    """Shannon entropy in bits of the normalized amplitude histogram.

    Accepts a :class:`~blinkflow.spectro.Spectrogram` or a plain 2-D array.
    Bin edges are tied to the data range, so any increasing affine map of the
    cells leaves the value unchanged.
    """
    if n_bins < 2:
        raise ConfigurationError("n_bins must be >= 2")
    x = getattr(sp, "power", sp)
    x = np.asarray(x, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise InvalidInputError("spectrogram must be non-empty and finite")
    counts = histogram_counts(x, n_bins)
    p = counts[counts > 0] / x.size
    h = float(-(p * np.log2(p)).sum())
    return max(h, 0.0)


def metric_vector(series: BlinkSeries, sp, cfg: DetectorConfig | None = None, n_bins: int = 256,
                  detrend_s: float = 1.0) -> MetricVector:
    """(BR, BD, BE) for one block; ``series`` is the raw ratio signal."""
    events = detect_blinks(detrend(series, detrend_s), cfg)
    bd, empty = blink_duration(events)
    bd_med, _ = blink_duration(events, "median")
    return MetricVector(
        br=blink_rate(events, series.duration),
        bd=bd,
        be=blink_entropy(sp, n_bins),
        bd_median=bd_med,
        n_blinks=len(events),
        no_blinks=empty,
    )


def max_entropy(n_bins: int, n_cells: int) -> float:
    return math.log2(min(n_bins, n_cells))
