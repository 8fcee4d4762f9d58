import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blinkflow.errors import InvalidInputError, OrderingError, ParseError
from blinkflow.ingest import (
    BlinkSeries,
    EyeLandmarks,
    eye_aspect_ratio,
    load_series,
    read_series,
    save_series,
    split_name,
    write_series,
)

OPEN_EYE = [(0, 0), (1, 1), (3, 1), (4, 0), (3, -1), (1, -1)]  # p1..p6


def test_ratio_exact_geometry():
    lm = EyeLandmarks.from_array(OPEN_EYE)
    assert eye_aspect_ratio(lm, eps=1e-6) == 2.0


def test_ratio_scaled_by_ten():
    lm = EyeLandmarks.from_array(np.array(OPEN_EYE) * 10)
    assert eye_aspect_ratio(lm) == pytest.approx(2.0, rel=1e-15)


def test_closed_eye_is_clamped():
    closed = [(0, 0), (1, 0), (3, 0), (4, 0), (3, 0), (1, 0)]
    r = eye_aspect_ratio(EyeLandmarks.from_array(closed), eps=1e-6)
    assert r == pytest.approx(4.0e6)
    assert math.isfinite(r)


def test_non_finite_landmarks_rejected():
    pts = np.array(OPEN_EYE, dtype=float)
    pts[2, 1] = np.nan
    with pytest.raises(InvalidInputError):
        eye_aspect_ratio(EyeLandmarks.from_array(pts))


def test_zero_width_rejected():
    pts = np.array(OPEN_EYE, dtype=float)
    pts[3] = pts[0]
    with pytest.raises(InvalidInputError):
        eye_aspect_ratio(EyeLandmarks.from_array(pts))


@settings(max_examples=200, deadline=None)
@given(
    angle=st.floats(-math.pi, math.pi),
    scale=st.floats(0.01, 100.0),
    dx=st.floats(-1e3, 1e3),
    dy=st.floats(-1e3, 1e3),
    lid=st.floats(0.05, 3.0),
)
def test_ratio_similarity_invariant(angle, scale, dx, dy, lid):
    pts = np.array([(0, 0), (1.2, lid), (2.9, lid * 0.9), (4, 0.1), (3.1, -lid), (0.8, -lid * 1.1)])
    base = eye_aspect_ratio(EyeLandmarks.from_array(pts))
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    moved = scale * pts @ rot.T + np.array([dx, dy])
    # translating far from the origin costs digits in the coordinate differences
    assert eye_aspect_ratio(EyeLandmarks.from_array(moved)) == pytest.approx(base, rel=1e-9)


def test_ratio_rises_as_eye_closes():
    ratios = []
    for lid in np.linspace(1.0, 0.01, 25):
        pts = [(0, 0), (1, lid), (3, lid), (4, 0), (3, -lid), (1, -lid)]
        ratios.append(eye_aspect_ratio(EyeLandmarks.from_array(pts)))
    assert np.all(np.diff(ratios) > 0)


# -- reading and writing -------------------------------------------------------


def test_read_two_sample_csv():
    s = read_series(b"t,ear\n0.0,1.2\n0.1,1.3")
    assert len(s) == 2
    assert s.samples == [(0.0, 1.2), (0.1, 1.3)]


def test_out_of_order_csv():
    with pytest.raises(OrderingError) as err:
        read_series(b"t,ear\n0.0,1.0\n0.2,1.2\n0.1,1.3\n")
    assert err.value.line == 4


def test_empty_file():
    with pytest.raises(ParseError):
        read_series(b"")


@pytest.mark.parametrize(
    "payload, line",
    [
        (b"t,ear\n0.0,1.0\nabc,1.0\n", 3),
        (b"t,ear\n0.0,1.0\n0.1\n", 3),
        (b"time,ear\n0.0,1.0\n0.1,1.0\n", 1),
        (b"t,ear\n0.0,1.0\n0.1,nan\n", 3),
    ],
)
def test_malformed_rows_report_line(payload, line):
    with pytest.raises(ParseError) as err:
        read_series(payload)
    assert err.value.line == line


def test_jsonl_read_and_errors():
    s = read_series(b'{"t":0,"ear":1.5}\n{"t":0.5,"ear":2.5}\n', "jsonl")
    assert s.samples == [(0.0, 1.5), (0.5, 2.5)]
    with pytest.raises(ParseError) as err:
        read_series(b'{"t":0,"ear":1.5}\n{"t":0.5}\n', "jsonl")
    assert err.value.line == 2


def test_write_two_samples():
    s = BlinkSeries([0.0, 0.1], [1.2, 1.3])
    assert write_series(s, "csv") == b"t,ear\n0,1.2\n0.1,1.3\n"


def _random_series(seed, n=1000):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.01, 0.2, n))
    v = rng.normal(1.0, 0.5, n) * 10.0 ** rng.integers(-3, 4, n)
    return BlinkSeries(t, v, "S01", "easy")


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
@pytest.mark.parametrize("seed", range(5))
def test_round_trip(fmt, seed):
    s = _random_series(seed)
    once = read_series(write_series(s, fmt), fmt, "S01", "easy")
    # printing at 9 significant digits is the only loss
    np.testing.assert_allclose(once.t, s.t, rtol=1e-8)
    np.testing.assert_allclose(once.v, s.v, rtol=1e-8)
    # and values already at that precision survive bit-exactly
    assert read_series(write_series(once, fmt), fmt, "S01", "easy") == once


def test_from_stream_and_files(tmp_path):
    s = _random_series(7, n=50)
    path = tmp_path / "P03__hard.csv"
    save_series(s, path)
    loaded = load_series(path)
    assert (loaded.subject_id, loaded.block_id) == ("P03", "hard")
    assert read_series(io.BytesIO(path.read_bytes()), "csv", "P03", "hard") == loaded
    jpath = tmp_path / "P03__hard.jsonl"
    save_series(loaded, jpath)
    assert load_series(jpath) == loaded


def test_split_name():
    assert split_name("a/b/S1__Baseline.csv") == ("S1", "Baseline")
    assert split_name("lonely.csv") == ("lonely", "")


def test_series_invariants():
    with pytest.raises(InvalidInputError):
        BlinkSeries([0.0], [1.0])
    with pytest.raises(OrderingError):
        BlinkSeries([0.0, 0.0], [1.0, 1.0])
    s = BlinkSeries([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        s.v[0] = 5.0
