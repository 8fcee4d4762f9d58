"""Labelled instances, labeling strategies and leave-one-subject-out folds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigurationError, DegenerateLabelingError, LabelingError
from ..ingest import BlinkSeries
from ..metrics import DetectorConfig, metric_vector
from ..preprocess import WindowConfig, detrend
from ..spectro import build_spectrogram, minmax_normalize

INPUT_KINDS = ("spectrogram", "features", "timeseries")
LABELINGS = ("event", "subjective", "objective")
FEATURE_NAMES = ("br", "bd", "be")
BASELINE_EVENTS = ("baseline",)
# aux scalar consulted by each binary labeling, and whether a high value of it
# means high difficulty
_MEASURES = {
    "subjective": ("perceived_difficulty", True),
    "objective": ("correct_rate", False),
}


@dataclass
class BlockFeatures:
    """Every model input derived from one measurement block."""

    subject_id: str
    block_id: str
    event: str
    spectrogram: np.ndarray  # min-max normalized, T x F
    features: dict
    timeseries: np.ndarray
    aux: dict = field(default_factory=dict)
    degenerate: bool = False


def resample_1hz(series: BlinkSeries, rate_hz: float = 1.0) -> np.ndarray:
    """Average the signal within consecutive 1/rate_hz bins from the first sample."""
    width = 1.0 / rate_hz
    n = int(np.floor(series.duration * rate_hz + 1e-9))
    if n < 1:
        raise ConfigurationError("series shorter than one resampling bin")
    idx = np.floor((series.t - series.t[0]) / width + 1e-9).astype(int)
    keep = idx < n
    sums = np.bincount(idx[keep], weights=series.v[keep], minlength=n)
    counts = np.bincount(idx[keep], minlength=n)
    out = np.zeros(n)
    np.divide(sums, counts, out=out, where=counts > 0)
    # empty bins (long dropouts) take the previous bin's value
    for k in np.flatnonzero(counts == 0):
        out[k] = out[k - 1] if k > 0 else 0.0
    return out


def featurize(
    series: BlinkSeries,
    event: str | None = None,
    aux: dict | None = None,
    win_cfg: WindowConfig | None = None,
    det_cfg: DetectorConfig | None = None,
    n_bins: int = 256,
) -> BlockFeatures:
    win_cfg = win_cfg or WindowConfig()
    sp = build_spectrogram(series, win_cfg)
    mv = metric_vector(series, sp, det_cfg, n_bins)
    norm = minmax_normalize(sp)
    ts = resample_1hz(detrend(series, win_cfg.detrend_s))
    return BlockFeatures(
        subject_id=series.subject_id,
        block_id=series.block_id,
        event=series.block_id if event is None else event,
        spectrogram=norm.power,
        features={"br": mv.br, "bd": mv.bd, "be": mv.be},
        timeseries=ts,
        aux=dict(aux or {}),
        degenerate=norm.degenerate,
    )


@dataclass
class LabeledInstance:
    input: np.ndarray
    kind: str
    label: int
    subject_id: str
    block_id: str
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ConfigurationError(f"unknown input kind {self.kind!r}")


@dataclass
class Dataset:
    instances: list[LabeledInstance]
    n_classes: int
    labeling: str
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len({i.subject_id for i in self.instances}) < 2:
            raise LabelingError("a dataset needs at least 2 distinct subjects")
        labels = {i.label for i in self.instances}
        if any(not 0 <= y < self.n_classes for y in labels):
            raise LabelingError("label out of range")
        if len(labels) != self.n_classes:
            raise DegenerateLabelingError(f"only {len(labels)} of {self.n_classes} classes are present")
        if len({i.kind for i in self.instances}) != 1:
            raise ConfigurationError("all instances must share one input kind")

    def __len__(self):
        return len(self.instances)

    @property
    def kind(self) -> str:
        return self.instances[0].kind

    @property
    def subjects(self) -> list[str]:
        return sorted({i.subject_id for i in self.instances})

    @property
    def X(self) -> np.ndarray:
        return np.stack([i.input for i in self.instances])

    @property
    def y(self) -> np.ndarray:
        return np.array([i.label for i in self.instances], dtype=int)

    def with_labels(self, labels) -> "Dataset":
        inst = [
            LabeledInstance(i.input, i.kind, int(y), i.subject_id, i.block_id, i.aux)
            for i, y in zip(self.instances, labels)
        ]
        return Dataset(inst, self.n_classes, self.labeling, self.class_names)


def _sse(x: np.ndarray) -> float:
    return float(((x - x.mean()) ** 2).sum()) if x.size else 0.0


def kmeans_split(values: Sequence[float], seed: int | None = None) -> np.ndarray:
    """Optimal 1-D two-cluster split; returns 1 for the high cluster, 0 otherwise.

    In one dimension the two clusters are separated by a threshold between
    consecutive sorted values, so scanning every threshold with prefix sums
    yields the global within-cluster-sum-of-squares minimum. Ties are resolved
    toward the lowest threshold. ``seed`` is accepted for interface symmetry;
    the result is deterministic.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise LabelingError("need at least 2 values to split")
    if np.all(x == x[0]):
        raise DegenerateLabelingError("all values are equal")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.size
    k = np.arange(1, n)  # size of the low cluster
    s = np.cumsum(xs)
    q = np.cumsum(xs**2)
    low = q[k - 1] - s[k - 1] ** 2 / k
    high = (q[-1] - q[k - 1]) - (s[-1] - s[k - 1]) ** 2 / (n - k)
    cost = low + high
    valid = xs[k - 1] < xs[k]  # cannot cut between equal values
    cost = np.where(valid, cost, np.inf)
    best = int(k[np.argmin(cost)])
    thresh = xs[best - 1]
    return (x > thresh).astype(int)


def cluster_sse(values, labels) -> float:
    x = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    return _sse(x[labels == 0]) + _sse(x[labels == 1])


def _input_of(block: BlockFeatures, kind: str, feature_names: Sequence[str]) -> np.ndarray:
    if kind == "spectrogram":
        return np.asarray(block.spectrogram, dtype=float)
    if kind == "features":
        return np.array([block.features[n] for n in feature_names], dtype=float)
    if kind == "timeseries":
        return np.asarray(block.timeseries, dtype=float)
    raise ConfigurationError(f"unknown input kind {kind!r}")


def make_dataset(
    blocks: Iterable[BlockFeatures],
    labeling: str = "event",
    kind: str = "spectrogram",
    feature_names: Sequence[str] = FEATURE_NAMES,
    event_order: Sequence[str] | None = None,
    baseline_events: Sequence[str] = BASELINE_EVENTS,
) -> Dataset:
    """Label blocks by event identity, perceived difficulty or correct-answer rate.

    Event labeling gives one class per distinct event (ordered by
    ``event_order`` when supplied, else alphabetically). The two binary
    strategies drop baseline blocks and split the cohort-wide scalar with
    :func:`kmeans_split`; class 1 is always the high-difficulty side.
    """
    blocks = list(blocks)
    if labeling not in LABELINGS:
        raise ConfigurationError(f"unknown labeling {labeling!r}")
    if kind == "features":
        unknown = set(feature_names) - set(FEATURE_NAMES)
        if unknown or not feature_names:
            raise ConfigurationError(f"bad feature names {sorted(unknown)}")
    if labeling == "event":
        events = list(event_order) if event_order else sorted({b.event for b in blocks})
        missing = {b.event for b in blocks} - set(events)
        if missing:
            raise LabelingError(f"events missing from event_order: {sorted(missing)}")
        labels = [events.index(b.event) for b in blocks]
        names = events
    else:
        key, high_is_hard = _MEASURES[labeling]
        skip = {e.lower() for e in baseline_events}
        blocks = [b for b in blocks if b.event.lower() not in skip]
        if not blocks:
            raise LabelingError("no task blocks left after excluding baseline blocks")
        missing = [f"{b.subject_id}/{b.block_id}" for b in blocks if key not in b.aux]
        if missing:
            raise LabelingError(f"aux scalar {key!r} missing for {missing[:3]}")
        high = kmeans_split([float(b.aux[key]) for b in blocks])
        labels = list(high if high_is_hard else 1 - high)
        names = ["low", "high"]
    inst = [
        LabeledInstance(_input_of(b, kind, feature_names), kind, int(y), b.subject_id, b.block_id, dict(b.aux))
        for b, y in zip(blocks, labels)
    ]
    return Dataset(inst, len(names), labeling, list(names))


def permute_labels(ds: Dataset, seed: int = 0, within_subject: bool = True) -> Dataset:
    """Copy of ``ds`` with labels randomly permuted, for null-model checks.

    Permuting within each subject keeps every subject's class composition, so
    LOSO training sets keep their class balance. A cohort-wide permutation
    unbalances them, and a learner that only picks up the training prior then
    scores systematically below chance on the held-out subject.
    """
    rng = np.random.default_rng(seed)
    y = ds.y.copy()
    if not within_subject:
        return ds.with_labels(rng.permutation(y))
    subj = np.array([i.subject_id for i in ds.instances])
    for s in ds.subjects:
        idx = np.flatnonzero(subj == s)
        y[idx] = rng.permutation(y[idx])
    return ds.with_labels(y)


def loso_folds(ds: Dataset) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """One ``(subject, train_idx, test_idx)`` fold per subject, ordered by subject id."""
    subj = np.array([i.subject_id for i in ds.instances])
    folds = []
    for s in ds.subjects:
        test = np.flatnonzero(subj == s)
        train = np.flatnonzero(subj != s)
        folds.append((s, train, test))
    return folds
