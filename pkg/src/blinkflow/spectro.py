"""Lomb-Scargle blink spectrograms: computation, normalization and export."""
from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, NumericalDegeneracyError, ParseError
from .ingest import BlinkSeries
from .preprocess import WindowConfig, WindowSegment, bandpass, detrend, slice_windows, taper


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    freqs: np.ndarray

    def __len__(self):
        return self.freqs.size

    @property
    def f_lo(self) -> float:
        return float(self.freqs[0])

    @property
    def f_hi(self) -> float:
        return float(self.freqs[-1])

    def index_of(self, f: float) -> int:
        """Index of the bin nearest to ``f`` (Hz)."""
        return int(np.argmin(np.abs(self.freqs - f)))


def frequency_grid(f_lo: float, f_hi: float, n: int = 93) -> FrequencyGrid:
    """``n`` evenly spaced frequencies, both endpoints included."""
    if not (0 < f_lo < f_hi) or n < 2:
        raise ConfigurationError(f"invalid grid: f_lo={f_lo}, f_hi={f_hi}, n={n}")
    freqs = f_lo + (f_hi - f_lo) * np.arange(n) / (n - 1)
    freqs[-1] = f_hi
    return FrequencyGrid(freqs)


def lomb_scargle(t: np.ndarray, y: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Classic (unnormalized) Lomb-Scargle power.

    ``y`` is expected to be mean-removed already. The per-frequency offset
    ``tau`` makes the sine and cosine regressors orthogonal, so the result
    equals half the squared norm of the least-squares sinusoid fit.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    if t.size < 4:
        raise NumericalDegeneracyError("Lomb-Scargle needs at least 4 samples")
    if np.ptp(t) == 0:
        raise NumericalDegeneracyError("all samples share one timestamp")
    # relative time improves conditioning; the estimator is origin-invariant
    t = t - t[0]
    omega = 2 * np.pi * freqs[:, None]
    wt = omega * t[None, :]
    tau = np.arctan2(np.sin(2 * wt).sum(axis=1), np.cos(2 * wt).sum(axis=1)) / (2 * omega[:, 0])
    arg = omega * (t[None, :] - tau[:, None])
    c, s = np.cos(arg), np.sin(arg)
    yc, ys = c @ y, s @ y
    cc, ss = (c * c).sum(axis=1), (s * s).sum(axis=1)
    tiny = 1e-12 * t.size
    pc = np.divide(yc**2, cc, out=np.zeros_like(yc), where=cc > tiny)
    ps = np.divide(ys**2, ss, out=np.zeros_like(ys), where=ss > tiny)
    return 0.5 * (pc + ps)


def segment_power(segment: WindowSegment, grid: FrequencyGrid) -> np.ndarray:
    return lomb_scargle(segment.t, segment.v, grid.freqs)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Time x frequency power matrix (rows are windows, columns frequencies)."""

    times: np.ndarray
    grid: FrequencyGrid
    power: np.ndarray
    normalized: bool = False
    degenerate: bool = False
    unfiltered_windows: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.power.shape

    @property
    def freqs(self) -> np.ndarray:
        return self.grid.freqs


def build_spectrogram(series: BlinkSeries, cfg: WindowConfig | None = None) -> Spectrogram:
    """detrend -> windows -> bandpass -> taper -> Lomb-Scargle, stacked by window."""
    cfg = cfg or WindowConfig()
    grid = frequency_grid(cfg.f_lo, cfg.f_hi, cfg.n_freqs)
    clean = detrend(series, cfg.detrend_s)
    segments = slice_windows(clean, cfg)
    power = np.empty((len(segments), len(grid)))
    unfiltered = 0
    for k, seg in enumerate(segments):
        seg = bandpass(seg, cfg)
        unfiltered += not seg.filtered
        power[k] = segment_power(taper(seg), grid)
    times = np.array([s.t_center for s in segments])
    return Spectrogram(times, grid, power, unfiltered_windows=unfiltered)


def minmax_normalize(sp: Spectrogram) -> Spectrogram:
    """Joint min-max scaling of every cell to [0, 1]."""
    lo, hi = sp.power.min(), sp.power.max()
    if hi > lo:
        power = (sp.power - lo) / (hi - lo)
        return replace(sp, power=power, normalized=True, degenerate=False)
    return replace(sp, power=np.zeros_like(sp.power), normalized=True, degenerate=True)


def export_spectrogram(sp: Spectrogram, fmt: str = "csv") -> bytes:
    """CSV with a ``t\\f`` header of frequencies, or a plain-text P2 PGM."""
    if fmt == "csv":
        out = io.StringIO()
        out.write("t\\f," + ",".join(f"{f:.9g}" for f in sp.freqs) + "\n")
        for t, row in zip(sp.times, sp.power):
            out.write(f"{t:.9g}," + ",".join(f"{p:.9g}" for p in row) + "\n")
        return out.getvalue().encode("utf-8")
    if fmt == "pgm":
        x = sp.power if sp.normalized else minmax_normalize(sp).power
        pix = np.rint(255 * np.clip(x, 0.0, 1.0)).astype(int)
        n_t, n_f = pix.shape
        lines = ["P2", f"{n_f} {n_t}", "255"] + [" ".join(map(str, row)) for row in pix]
        return ("\n".join(lines) + "\n").encode("ascii")
    raise ConfigurationError(f"unknown spectrogram format {fmt!r}")


def import_spectrogram_csv(data: bytes | str, normalized: bool = False) -> Spectrogram:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("t\\f,"):
        raise ParseError("missing 't\\f' header", 1)
    try:
        freqs = np.array([float(x) for x in lines[0].split(",")[1:]])
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if rows.ndim != 2 or rows.shape[1] != freqs.size + 1:
        raise ParseError("ragged spectrogram rows")
    return Spectrogram(rows[:, 0], FrequencyGrid(freqs), rows[:, 1:], normalized=normalized)
