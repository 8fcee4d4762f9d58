import numpy as np
import pytest

from blinkflow.errors import ConfigurationError
from blinkflow.ingest import write_series
from blinkflow.spectro import build_spectrogram
from blinkflow.synth import (
    CLASS_TEMPLATES,
    SynthConfig,
    blink_onsets,
    block_filename,
    generate,
    make_cohort,
    pulse,
)


def test_default_block_geometry():
    series, truth = generate(SynthConfig())
    assert len(series) == 2601
    assert series.t[0] == 0.0 and series.t[-1] == 260.0
    assert len(truth.events) == 52
    np.testing.assert_allclose(np.diff(truth.onsets), 5.0)
    assert truth.onsets[0] == 2.5


def test_same_seed_same_bytes():
    cfg = SynthConfig(rate_jitter=0.4, noise_sigma=0.1, drift_amp=0.2, dropout_frac=0.1, time_jitter_s=0.01, seed=9)
    a, _ = generate(cfg)
    b, _ = generate(cfg)
    assert write_series(a) == write_series(b)
    c, _ = generate(SynthConfig(rate_jitter=0.4, seed=10))
    assert write_series(a) != write_series(c)


def test_dropout_and_jitter_keep_order():
    cfg = SynthConfig(dropout_frac=0.1, time_jitter_s=0.01, seed=3)
    series, _ = generate(cfg)
    assert len(series) == 2601 - 260
    assert np.all(np.diff(series.t) > 0)
    assert series.t[0] == 0.0 and series.t[-1] == 260.0


def test_pulse_shape():
    cfg = SynthConfig(blink_dur_s=0.3)
    t = np.linspace(0, 0.3, 301)
    p = pulse(t, 0.0, cfg)
    assert p.max() == pytest.approx(1.0)
    assert t[np.argmax(p)] == pytest.approx(0.1)
    assert p[0] == 0.0 and p[-1] == 0.0
    assert np.all(p >= 0)


def test_jittered_intervals_have_requested_spread():
    cfg = SynthConfig(blink_rate_bpm=10.0, rate_jitter=0.5, duration_s=1e5)
    gaps = np.diff(blink_onsets(cfg, np.random.default_rng(0)))
    assert gaps.mean() == pytest.approx(6.0, rel=0.03)
    assert gaps.std() / gaps.mean() == pytest.approx(0.5, rel=0.05)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"rate_jitter": 1.5},
        {"blink_rate_bpm": 0.0},
        {"blink_dur_s": 10.0},
        {"dropout_frac": 0.6},
        {"time_jitter_s": 0.06},
        {"fs": 0.0},
    ],
)
def test_config_errors(kwargs):
    with pytest.raises(ConfigurationError):
        SynthConfig(**kwargs)


def test_in_band():
    assert SynthConfig(blink_rate_bpm=12.0).in_band()
    assert not SynthConfig(blink_rate_bpm=1.0).in_band()
    assert not SynthConfig(blink_rate_bpm=12.0, fs=0.5).in_band()


@pytest.mark.parametrize("rate", [4.0, 6.0, 10.0, 20.0])
def test_in_band_rate_dominates_spectrogram(rate):
    # sinusoidal-looking trains (wide pulses) put most power on the fundamental
    series, _ = generate(SynthConfig(blink_rate_bpm=rate, blink_dur_s=min(2.0, 30.0 / rate)))
    sp = build_spectrogram(series)
    peak = sp.freqs[np.argmax(sp.power.mean(axis=0))]
    assert peak * 60 == pytest.approx(rate, abs=0.5)


def test_cohort_layout_and_determinism():
    cohort = make_cohort(4, {"periodic": CLASS_TEMPLATES["periodic"], "irregular": CLASS_TEMPLATES["irregular"]},
                         blocks_per_class=2, seed=5)
    assert len(cohort.blocks) == 16
    assert cohort.class_names == ["periodic", "irregular"]
    assert {b.subject_id for b in cohort.blocks} == {"S1", "S2", "S3", "S4"}
    assert cohort.blocks[0].block_id == "periodic-1"
    man = cohort.manifest()
    assert man["blocks"][0]["file"] == block_filename("S1", "periodic-1") == "S1__periodic-1.csv"
    again = make_cohort(4, {"periodic": CLASS_TEMPLATES["periodic"], "irregular": CLASS_TEMPLATES["irregular"]},
                        blocks_per_class=2, seed=5)
    assert again.manifest() == man
    for b in cohort.blocks:
        assert 9.0 <= b.config.blink_rate_bpm <= 11.0
        assert set(b.aux) == {"perceived_difficulty", "correct_rate"}


def test_cohort_errors():
    with pytest.raises(ConfigurationError):
        make_cohort(1, [SynthConfig(), SynthConfig()])
    with pytest.raises(ConfigurationError):
        make_cohort(3, [SynthConfig()])
    with pytest.raises(ConfigurationError):
        make_cohort(3, [SynthConfig(), SynthConfig()], blocks_per_class=0)
