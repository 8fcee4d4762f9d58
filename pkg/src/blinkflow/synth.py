"""Seeded synthetic blink signals with known ground truth.

Inter-blink intervals are gamma distributed with a configurable coefficient
of variation, so ``rate_jitter=0`` gives a perfectly periodic train and
``rate_jitter=1`` an exponential (Poisson-like) one.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .ingest import BlinkSeries
from .metrics import BlinkEvent
from .preprocess import BPM


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 260.0
    fs: float = 10.0
    blink_rate_bpm: float = 12.0
    rate_jitter: float = 0.0
    blink_dur_s: float = 0.3
    onset_frac: float = 1.0 / 3.0  # rise time / pulse width; 1:2 rise:fall
    pulse_amp: float = 1.0
    noise_sigma: float = 0.0
    drift_amp: float = 0.0
    drift_period_s: float = 120.0
    dropout_frac: float = 0.0
    time_jitter_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.duration_s > 0 or not self.fs > 0:
            raise ConfigurationError("duration_s and fs must be positive")
        if not self.blink_rate_bpm > 0:
            raise ConfigurationError("blink_rate_bpm must be positive")
        if not 0 <= self.rate_jitter <= 1:
            raise ConfigurationError("rate_jitter must lie in [0, 1]")
        if not 0 < self.onset_frac < 1:
            raise ConfigurationError("onset_frac must lie in (0, 1)")
        if not 0 <= self.dropout_frac < 0.5:
            raise ConfigurationError("dropout_frac must lie in [0, 0.5)")
        if self.blink_dur_s <= 0 or self.blink_dur_s >= 60.0 / self.blink_rate_bpm:
            raise ConfigurationError("blink_dur_s must be positive and shorter than the mean interval")
        if not 0 <= self.time_jitter_s < 0.5 / self.fs:
            raise ConfigurationError("time_jitter_s must stay below half a sample period")

    def in_band(self, f_lo_bpm: float = 2.0, f_hi_bpm: float = 25.0) -> bool:
        return f_lo_bpm <= self.blink_rate_bpm <= f_hi_bpm and self.fs > 2 * f_hi_bpm * BPM


@dataclass
class GroundTruth:
    events: list[BlinkEvent]
    nominal_rate_bpm: float
    class_id: int | None = None

    @property
    def onsets(self) -> np.ndarray:
        return np.array([e.onset_t for e in self.events])


def blink_onsets(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    mean = 60.0 / cfg.blink_rate_bpm
    n_max = int(cfg.duration_s / mean * 3) + 10
    if cfg.rate_jitter == 0:
        gaps = np.full(n_max, mean)
    else:
        shape = 1.0 / cfg.rate_jitter**2
        gaps = rng.gamma(shape, mean / shape, size=n_max)
    # the first blink sits half an interval in; consecutive pulses never overlap
    gaps = np.maximum(gaps, cfg.blink_dur_s + 1.0 / cfg.fs)
    onsets = mean / 2 + np.concatenate(([0.0], np.cumsum(gaps[:-1])))
    return onsets[onsets + cfg.blink_dur_s <= cfg.duration_s]


def pulse(t: np.ndarray, onset: float, cfg: SynthConfig) -> np.ndarray:
    """Asymmetric raised-cosine pulse: fast closing, slower reopening."""
    rise = cfg.blink_dur_s * cfg.onset_frac
    fall = cfg.blink_dur_s - rise
    u = t - onset
    out = np.zeros_like(t)
    up = (u > 0) & (u <= rise)
    down = (u > rise) & (u < cfg.blink_dur_s)
    out[up] = 0.5 * (1 - np.cos(np.pi * u[up] / rise))
    out[down] = 0.5 * (1 + np.cos(np.pi * (u[down] - rise) / fall))
    return cfg.pulse_amp * out


def generate(cfg: SynthConfig, class_id: int | None = None, subject_id: str = "", block_id: str = ""):
    """Return ``(BlinkSeries, GroundTruth)`` for one synthetic block."""
    rng = np.random.default_rng(cfg.seed)
    n = int(round(cfg.duration_s * cfg.fs)) + 1
    t = np.arange(n) / cfg.fs
    onsets = blink_onsets(cfg, rng)
    if cfg.time_jitter_s > 0:
        t = t + rng.uniform(-cfg.time_jitter_s, cfg.time_jitter_s, size=n)
        t[0], t[-1] = 0.0, cfg.duration_s
    v = np.ones(n)
    for onset in onsets:
        lo, hi = np.searchsorted(t, [onset, onset + cfg.blink_dur_s])
        v[lo:hi] += pulse(t[lo:hi], onset, cfg)
    if cfg.drift_amp:
        v += cfg.drift_amp * np.sin(2 * np.pi * t / cfg.drift_period_s)
    if cfg.noise_sigma:
        v += rng.normal(0.0, cfg.noise_sigma, size=n)
    if cfg.dropout_frac:
        n_drop = int(cfg.dropout_frac * n)
        drop = rng.choice(np.arange(1, n - 1), size=n_drop, replace=False)
        keep = np.ones(n, dtype=bool)
        keep[drop] = False
        t, v = t[keep], v[keep]
    events = [BlinkEvent(float(o), float(o + cfg.blink_dur_s)) for o in onsets]
    truth = GroundTruth(events, cfg.blink_rate_bpm, class_id)
    return BlinkSeries(t, v, subject_id, block_id), truth


# Named class templates used by the CLI and the acceptance experiments.
CLASS_TEMPLATES = {
    "periodic": SynthConfig(blink_rate_bpm=10.0, rate_jitter=0.05, noise_sigma=0.05, drift_amp=0.05),
    "irregular": SynthConfig(blink_rate_bpm=10.0, rate_jitter=0.6, noise_sigma=0.05, drift_amp=0.05),
    "slow": SynthConfig(blink_rate_bpm=6.0, rate_jitter=0.2, noise_sigma=0.05, drift_amp=0.05),
    "fast": SynthConfig(blink_rate_bpm=18.0, rate_jitter=0.2, noise_sigma=0.05, drift_amp=0.05),
}


@dataclass
class SynthBlock:
    """One generated block plus the labels and scalars a cohort attaches to it."""

    subject_id: str
    block_id: str
    event: str
    class_id: int
    series: BlinkSeries
    truth: GroundTruth
    config: SynthConfig
    aux: dict = field(default_factory=dict)


@dataclass
class Cohort:
    blocks: list[SynthBlock]
    class_names: list[str]
    seed: int

    @property
    def truths(self) -> list[GroundTruth]:
        return [b.truth for b in self.blocks]

    def manifest(self) -> dict:
        return {
            "format_version": 1,
            "seed": self.seed,
            "classes": self.class_names,
            "blocks": [
                {
                    "file": block_filename(b.subject_id, b.block_id),
                    "subject": b.subject_id,
                    "block": b.block_id,
                    "event": b.event,
                    "class": b.class_id,
                    "aux": b.aux,
                    "config": asdict(b.config),
                }
                for b in self.blocks
            ],
        }


def block_filename(subject: str, block: str) -> str:
    return f"{subject}__{block}.csv"


def make_cohort(
    n_subjects: int,
    class_configs,
    blocks_per_class: int = 1,
    seed: int = 0,
    class_names: list[str] | None = None,
    rate_spread: float = 0.10,
) -> Cohort:
    """Generate ``n_subjects x n_classes x blocks_per_class`` labelled blocks.

    Every subject gets its own rate perturbation (uniform within
    ``+-rate_spread``) of each class template. Synthetic perceived-difficulty
    and correct-answer scalars rise/fall with the class index so the
    subjective and objective labelings can be exercised as well.
    """
    if isinstance(class_configs, dict):
        class_names = list(class_configs) if class_names is None else class_names
        class_configs = list(class_configs.values())
    class_configs = list(class_configs)
    if len(class_configs) < 2:
        raise ConfigurationError("a cohort needs at least 2 classes")
    if n_subjects < 2:
        raise ConfigurationError("a cohort needs at least 2 subjects (LOSO)")
    if blocks_per_class < 1:
        raise ConfigurationError("blocks_per_class must be >= 1")
    class_names = class_names or [f"class{k}" for k in range(len(class_configs))]
    n_cls = len(class_configs)
    ss = np.random.SeedSequence(seed)
    blocks = []
    width = len(str(n_subjects))
    for s_idx, s_seq in enumerate(ss.spawn(n_subjects)):
        subject = f"S{s_idx + 1:0{width}d}"
        rng = np.random.default_rng(s_seq)
        for c_idx, template in enumerate(class_configs):
            for b_idx in range(blocks_per_class):
                scale = 1 + rng.uniform(-rate_spread, rate_spread)
                cfg = replace(
                    template,
                    blink_rate_bpm=template.blink_rate_bpm * scale,
                    seed=int(rng.integers(2**31 - 1)),
                )
                block = class_names[c_idx] if blocks_per_class == 1 else f"{class_names[c_idx]}-{b_idx + 1}"
                series, truth = generate(cfg, c_idx, subject, block)
                level = c_idx / (n_cls - 1)
                aux = {
                    "perceived_difficulty": float(np.clip(2 + 5 * level + rng.normal(0, 0.8), 0, 10)),
                    "correct_rate": float(np.clip(0.9 - 0.4 * level + rng.normal(0, 0.05), 0, 1)),
                }
                blocks.append(SynthBlock(subject, block, class_names[c_idx], c_idx, series, truth, cfg, aux))
    return Cohort(blocks, list(class_names), seed)
