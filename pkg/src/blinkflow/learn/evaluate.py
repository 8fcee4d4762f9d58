"""Leave-one-subject-out evaluation and Table-1 style reporting."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigurationError
from . import baselines
from .data import Dataset, loso_folds
from .mdlstm import TrainConfig, fit_mdlstm, predict

# input kind each named method consumes
METHOD_INPUTS = {
    "mdlstm2d": "spectrogram",
    "knn": "features",
    "linear_svm": "features",
    "mlp": "timeseries",
    "lstm1d": "timeseries",
}


@dataclass
class EvalConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    grids: dict = field(default_factory=dict)  # per-baseline overrides of DEFAULT_GRIDS
    seed: int = 0

    def to_dict(self) -> dict:
        return {"train": asdict(self.train), "grids": self.grids, "seed": self.seed}


@dataclass
class FoldResult:
    subject: str
    accuracy: float
    confusion: list
    n_test: int
    hyperparameters: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    method: str
    labeling: str
    folds: list[FoldResult]
    config: dict
    seed: int
    class_names: list[str] = field(default_factory=list)

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def confusions(self) -> list[np.ndarray]:
        return [np.array(f.confusion) for f in self.folds]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "labeling": self.labeling,
            "classes": self.class_names,
            "mean_accuracy": self.mean_accuracy,
            "per_fold": [
                {
                    "subject": f.subject,
                    "accuracy": f.accuracy,
                    "n_test": f.n_test,
                    "confusion": f.confusion,
                    "hyperparameters": f.hyperparameters,
                }
                for f in self.folds
            ],
            "config": self.config,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# A fit/predict callable: (X_train, y_train, groups_train, X_test, n_classes, seed) -> (preds, hyperparameters)
FitPredict = Callable[..., tuple]


def _mdlstm_fit_predict(cfg: EvalConfig):
    def run(Xtr, ytr, groups, Xte, n_classes, seed):
        tcfg = TrainConfig(**{**asdict(cfg.train), "seed": seed})
        model, _ = fit_mdlstm(Xtr, ytr, n_classes, tcfg)
        return predict(model, Xte), {}

    return run


def _baseline_fit_predict(method: str, cfg: EvalConfig):
    def run(Xtr, ytr, groups, Xte, n_classes, seed):
        grid = cfg.grids.get(method)
        return baselines.baseline_fit_predict(method, Xtr, ytr, Xte, n_classes, groups, grid, seed)

    return run


def resolve_method(method, cfg: EvalConfig) -> FitPredict:
    if callable(method):
        return method
    if method == "mdlstm2d":
        return _mdlstm_fit_predict(cfg)
    if method in baselines.METHODS:
        return _baseline_fit_predict(method, cfg)
    raise ConfigurationError(f"unknown method {method!r}")


def confusion_matrix(y_true, y_pred, n_classes) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def evaluate(ds: Dataset, method, cfg: EvalConfig | None = None, method_name: str | None = None) -> EvalReport:
    """Run every LOSO fold; fold ``k`` trains with seed ``cfg.seed + k``."""
    cfg = cfg or EvalConfig()
    if isinstance(method, str) and METHOD_INPUTS.get(method) not in (None, ds.kind):
        raise ConfigurationError(f"{method} expects {METHOD_INPUTS[method]} inputs, dataset has {ds.kind}")
    fit_predict = resolve_method(method, cfg)
    name = method_name or (method if isinstance(method, str) else getattr(method, "__name__", "custom"))
    X, y = ds.X, ds.y
    subjects = np.array([i.subject_id for i in ds.instances])
    folds = []
    for k, (subject, tr, te) in enumerate(loso_folds(ds)):
        out = fit_predict(X[tr], y[tr], subjects[tr].tolist(), X[te], ds.n_classes, cfg.seed + k)
        pred, hp = out if isinstance(out, tuple) else (out, {})
        pred = np.asarray(pred, dtype=int)
        acc = float(np.mean(pred == y[te]))
        cm = confusion_matrix(y[te], pred, ds.n_classes)
        folds.append(FoldResult(subject, acc, cm.tolist(), int(te.size), dict(hp)))
    return EvalReport(name, ds.labeling, folds, cfg.to_dict(), cfg.seed, list(ds.class_names))


def format_table(reports: list[EvalReport]) -> str:
    """Method x labeling grid of mean LOSO accuracies (percent)."""
    methods = list(dict.fromkeys(r.method for r in reports))
    labelings = list(dict.fromkeys(r.labeling for r in reports))
    cell = {(r.method, r.labeling): r for r in reports}
    width = max(10, *(len(m) for m in methods))
    lines = [f"{'method':<{width}}" + "".join(f"{lab:>12}" for lab in labelings)]
    for m in methods:
        row = f"{m:<{width}}"
        for lab in labelings:
            r = cell.get((m, lab))
            row += f"{100 * r.mean_accuracy:>11.1f}%" if r else f"{'n/a':>12}"
        lines.append(row)
    return "\n".join(lines)
