"""Blink timeseries I/O and the eye aspect ratio.

The ratio is width over height, so a closing eye makes the signal rise and
blinks show up as upward peaks.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as np

from .errors import InvalidInputError, OrderingError, ParseError

FORMATS = ("csv", "jsonl")
CSV_HEADER = "t,ear"
DEFAULT_EPS = 1e-6

Point = Sequence[float]


@dataclass(frozen=True)
class EyeLandmarks:
    """Six eye landmarks in pixel coordinates.

    ``p1``/``p4`` are the horizontal corners, ``p2``/``p3`` sit on the upper
    lid and ``p6``/``p5`` on the lower lid below them.
    """

    p1: Point
    p2: Point
    p3: Point
    p4: Point
    p5: Point
    p6: Point

    @classmethod
    def from_array(cls, points) -> "EyeLandmarks":
        pts = np.asarray(points, dtype=float)
        if pts.shape != (6, 2):
            raise InvalidInputError(f"expected (6, 2) landmark array, got {pts.shape}")
        return cls(*(tuple(p) for p in pts))

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3, self.p4, self.p5, self.p6], dtype=float)


def eye_aspect_ratio(lm: EyeLandmarks, eps: float = DEFAULT_EPS) -> float:
    """Width-to-height ratio of one eye.

    ``h`` is the mean of the two lid distances and is clamped to ``eps`` so a
    fully closed eye yields a large finite value instead of a division by zero.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    pts = lm.as_array() if isinstance(lm, EyeLandmarks) else np.asarray(lm, dtype=float)
    if pts.shape != (6, 2):
        raise InvalidInputError(f"expected 6 two-dimensional landmarks, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("landmark coordinates must be finite")
    p1, p2, p3, p4, p5, p6 = pts
    w = math.hypot(*(p1 - p4))
    if w <= 0:
        raise InvalidInputError("eye corners coincide (zero width)")
    h = 0.5 * (math.hypot(*(p2 - p6)) + math.hypot(*(p3 - p5)))
    return w / max(h, eps)


@dataclass(frozen=True, eq=False)
class BlinkSeries:
    """Timestamped ratio signal of one measurement block.

    Samples are held as two float arrays; ``t`` is seconds since stream
    start and must be strictly increasing.
    """

    t: np.ndarray
    v: np.ndarray
    subject_id: str = ""
    block_id: str = ""

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        v = np.array(self.v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise InvalidInputError("t and v must be 1-D arrays of equal length")
        if t.size < 2:
            raise InvalidInputError("a series needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise InvalidInputError("samples must be finite")
        if t[0] < 0:
            raise InvalidInputError("timestamps must be >= 0")
        bad = np.flatnonzero(np.diff(t) <= 0)
        if bad.size:
            raise OrderingError(f"timestamps not strictly increasing at sample {bad[0] + 1}")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return self.t.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlinkSeries):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.block_id == other.block_id
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.v, other.v)
        )

    __hash__ = None

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.v.tolist()))

    def with_values(self, v) -> "BlinkSeries":
        return BlinkSeries(self.t, v, self.subject_id, self.block_id)


Source = Union[bytes, str, BinaryIO, io.TextIOBase]


def _lines(source: Source):
    if isinstance(source, bytes):
        text = source.decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    return text.splitlines()


def _parse_float(token: str, lineno: int, name: str) -> float:
    try:
        x = float(token)
    except ValueError:
        raise ParseError(f"cannot parse {name} value {token!r}", lineno) from None
    if not math.isfinite(x):
        raise ParseError(f"{name} value is not finite", lineno)
    return x


def read_series(source: Source, fmt: str = "csv", subject_id: str = "", block_id: str = "") -> BlinkSeries:
    """Parse a CSV (``t,ear`` header) or JSONL stream into a :class:`BlinkSeries`."""
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}")
    lines = _lines(source)
    t, v, linenos = [], [], []
    if fmt == "csv":
        if not lines or lines[0].strip() != CSV_HEADER:
            raise ParseError(f"first line must be {CSV_HEADER!r}", 1)
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 2 fields, got {len(parts)}", lineno)
            t.append(_parse_float(parts[0].strip(), lineno, "t"))
            v.append(_parse_float(parts[1].strip(), lineno, "ear"))
            linenos.append(lineno)
    else:
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict) or "t" not in obj or "ear" not in obj:
                raise ParseError("object must have keys 't' and 'ear'", lineno)
            t.append(_parse_float(str(obj["t"]), lineno, "t"))
            v.append(_parse_float(str(obj["ear"]), lineno, "ear"))
            linenos.append(lineno)
    if len(t) < 2:
        raise ParseError(f"need at least 2 samples, got {len(t)}")
    for i in range(1, len(t)):
        if t[i] <= t[i - 1]:
            raise OrderingError("timestamps must be strictly increasing", linenos[i])
    if t[0] < 0:
        raise ParseError("timestamps must be >= 0", linenos[0])
    return BlinkSeries(np.array(t), np.array(v), subject_id, block_id)


def write_series(series: BlinkSeries, fmt: str = "csv") -> bytes:
    """Serialize with 9 significant digits."""
    if fmt == "csv":
        rows = [CSV_HEADER] + [f"{a:.9g},{b:.9g}" for a, b in zip(series.t, series.v)]
    elif fmt == "jsonl":
        rows = [f'{{"t":{a:.9g},"ear":{b:.9g}}}' for a, b in zip(series.t, series.v)]
    else:
        raise ParseError(f"unknown format {fmt!r}")
    return ("\n".join(rows) + "\n").encode("utf-8")


def split_name(path: Union[str, Path]) -> tuple[str, str]:
    """``<subject>__<block>.csv`` -> (subject, block); missing parts are ''."""
    stem = Path(path).stem
    if "__" in stem:
        subject, block = stem.split("__", 1)
        return subject, block
    return stem, ""


def load_series(path: Union[str, Path], subject_id: str | None = None, block_id: str | None = None) -> BlinkSeries:
    path = Path(path)
    fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".json") else "csv"
    subject, block = split_name(path)
    with open(path, "rb") as fh:
        return read_series(
            fh,
            fmt,
            subject if subject_id is None else subject_id,
            block if block_id is None else block_id,
        )


def save_series(series: BlinkSeries, path: Union[str, Path]) -> None:
    path = Path(path)
    fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".json") else "csv"
    path.write_bytes(write_series(series, fmt))
