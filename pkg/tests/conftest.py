import numpy as np
import pytest

from blinkflow.ingest import BlinkSeries


def uniform_series(duration_s=260.0, fs=10.0, fn=None, subject="S1", block="b"):
    t = np.arange(int(round(duration_s * fs)) + 1) / fs
    v = np.ones_like(t) if fn is None else fn(t)
    return BlinkSeries(t, v, subject, block)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
