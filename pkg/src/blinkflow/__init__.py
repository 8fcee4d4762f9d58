"""Blink spectrograms, blink metrics and 2D-LSTM task-difficulty classification."""

from .errors import BlinkflowError
from .ingest import BlinkSeries, EyeLandmarks, eye_aspect_ratio, read_series, write_series
from .metrics import BlinkEvent, DetectorConfig, MetricVector, blink_entropy, detect_blinks, metric_vector
from .preprocess import WindowConfig, bandpass, detrend, moving_average, slice_windows
from .spectro import Spectrogram, build_spectrogram, export_spectrogram, frequency_grid, lomb_scargle, minmax_normalize

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BlinkflowError",
    "BlinkSeries",
    "EyeLandmarks",
    "eye_aspect_ratio",
    "read_series",
    "write_series",
    "BlinkEvent",
    "DetectorConfig",
    "MetricVector",
    "blink_entropy",
    "detect_blinks",
    "metric_vector",
    "WindowConfig",
    "bandpass",
    "detrend",
    "moving_average",
    "slice_windows",
    "Spectrogram",
    "build_spectrogram",
    "export_spectrogram",
    "frequency_grid",
    "lomb_scargle",
    "minmax_normalize",
]
