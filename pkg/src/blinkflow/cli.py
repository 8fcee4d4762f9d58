"""Command-line entry point: ``blinkflow {spectrogram,metrics,synth,train,evaluate}``.

Exit codes: 0 ok, 2 parse/configuration error, 3 insufficient data, 4 I/O
error, 5 degenerate labeling, 6 training failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .errors import (
    BlinkflowError,
    ConfigurationError,
    DegenerateLabelingError,
    InsufficientDataError,
    LabelingError,
    NumericOverflowError,
    ParseError,
    TrainingFailureError,
)
from .ingest import load_series
from .metrics import DetectorConfig, metric_vector
from .preprocess import BPM, WindowConfig
from .spectro import build_spectrogram, export_spectrogram, minmax_normalize

EXIT_OK, EXIT_PARSE, EXIT_DATA, EXIT_IO, EXIT_LABEL, EXIT_TRAIN = 0, 2, 3, 4, 5, 6
ALL_METHODS = ("mdlstm2d", "knn", "linear_svm", "mlp", "lstm1d")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BLINKFLOW_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigurationError(f"BLINKFLOW_SEED={env!r} is not an integer") from None


def _window_cfg(args) -> WindowConfig:
    return WindowConfig(
        win_len_s=args.win_len_s,
        step_s=args.step_s,
        gaussian_sigma_s=args.sigma_s,
        f_lo=args.f_lo_bpm * BPM,
        f_hi=args.f_hi_bpm * BPM,
        n_freqs=args.n_freqs,
        detrend_s=args.detrend_s,
    )


def _echo(args) -> dict:
    out = {k: v for k, v in vars(args).items() if k != "func"}
    return json.loads(json.dumps(out, default=str))


def _write(path: Path, data: bytes | str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, str):
            data = data.encode("utf-8")
        path.write_bytes(data)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


class _IOFailure(BlinkflowError):
    pass


def _series_files(path: Path) -> list[Path]:
    if path.is_dir():
        # skip spectrogram exports that may sit next to their inputs
        files = sorted(
            p for p in path.iterdir()
            if p.suffix.lower() in (".csv", ".jsonl") and not p.name.endswith(".spectrogram.csv")
        )
        if not files:
            raise ParseError(f"no .csv or .jsonl series in {path}")
        return files
    if not path.exists():
        raise _IOFailure(f"{path} does not exist")
    return [path]


# -- subcommands ----------------------------------------------------------------


def cmd_spectrogram(args) -> int:
    cfg = _window_cfg(args)
    src = Path(args.input)
    series = load_series(src)
    sp = build_spectrogram(series, cfg)
    out = Path(args.out) if args.out else src.parent
    stem = src.stem
    _write(out / f"{stem}.spectrogram.csv", export_spectrogram(sp, "csv"))
    written = [f"{stem}.spectrogram.csv"]
    norm = minmax_normalize(sp)
    if args.pgm:
        _write(out / f"{stem}.spectrogram.pgm", export_spectrogram(norm, "pgm"))
        written.append(f"{stem}.spectrogram.pgm")
    meta = {
        "input": str(src),
        "shape": list(sp.shape),
        "degenerate": norm.degenerate,
        "unfiltered_windows": sp.unfiltered_windows,
        "window_config": asdict(cfg),
        "seed": _seed(args),
        "args": _echo(args),
    }
    _write(out / f"{stem}.spectrogram.json", json.dumps(meta, indent=2, sort_keys=True))
    T, F = sp.shape
    print(f"{stem}: {T} x {F} (time x frequency), degenerate={norm.degenerate}, "
          f"unfiltered_windows={sp.unfiltered_windows}")
    for name in written:
        print(f"  wrote {out / name}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _window_cfg(args)
    det = DetectorConfig(args.threshold_scale, args.hysteresis_frac, args.min_gap_s)
    rows = ["subject,block,br,bd,be"]
    extra = []
    for path in _series_files(Path(args.input)):
        series = load_series(path)
        sp = build_spectrogram(series, cfg)
        mv = metric_vector(series, sp, det, args.bins, args.blink_detrend_s)
        rows.append(f"{series.subject_id},{series.block_id},{mv.br:.9g},{mv.bd:.9g},{mv.be:.9g}")
        extra.append({
            "subject": series.subject_id, "block": series.block_id,
            "bd_median": mv.bd_median, "n_blinks": mv.n_blinks, "no_blinks": mv.no_blinks,
        })
    text = "\n".join(rows) + "\n"
    meta = {
        "window_config": asdict(cfg),
        "detector_config": asdict(det),
        "bins": args.bins,
        "seed": _seed(args),
        "blocks": extra,
        "args": _echo(args),
    }
    if args.out:
        out = Path(args.out)
        _write(out, text)
        _write(out.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import CLASS_TEMPLATES, block_filename, make_cohort

    names = [c.strip() for c in args.classes.split(",") if c.strip()]
    unknown = [c for c in names if c not in CLASS_TEMPLATES]
    if unknown:
        raise ConfigurationError(f"unknown classes {unknown}; choose from {sorted(CLASS_TEMPLATES)}")
    templates = {}
    for c in names:
        t = CLASS_TEMPLATES[c]
        if args.duration_s is not None:
            t = replace(t, duration_s=args.duration_s)
        if args.fs is not None:
            t = replace(t, fs=args.fs)
        templates[c] = t
    seed = _seed(args)
    cohort = make_cohort(args.subjects, templates, args.blocks_per_class, seed)
    from .ingest import write_series

    out = Path(args.out)
    for b in cohort.blocks:
        _write(out / block_filename(b.subject_id, b.block_id), write_series(b.series, "csv"))
    manifest = cohort.manifest()
    manifest["args"] = _echo(args)
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {len(cohort.blocks)} series and manifest.json to {out}")
    return EXIT_OK


def _load_blocks(args):
    from .learn.data import featurize

    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise _IOFailure(f"cannot read {manifest_path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc.msg}", exc.lineno) from None
    cfg = _window_cfg(args)
    det = DetectorConfig(args.threshold_scale, args.hysteresis_frac, args.min_gap_s)
    blocks = []
    for entry in manifest.get("blocks", []):
        path = manifest_path.parent / entry["file"]
        if not path.exists():
            raise _IOFailure(f"{path} listed in the manifest does not exist")
        series = load_series(path, entry.get("subject"), entry.get("block"))
        blocks.append(featurize(series, entry.get("event"), entry.get("aux"), cfg, det, args.bins))
    if not blocks:
        raise ParseError("manifest lists no blocks")
    return blocks, manifest.get("classes")


def _train_cfg(args, seed):
    from .learn.mdlstm import TrainConfig

    return TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, seed=seed, clip=args.clip,
        pooling=args.pooling, batch_size=args.batch_size, hidden_size=args.hidden,
    )


def cmd_train(args) -> int:
    from .learn.data import make_dataset
    from .learn.mdlstm import fit_mdlstm

    seed = _seed(args)
    blocks, classes = _load_blocks(args)
    order = classes if args.labeling == "event" else None
    ds = make_dataset(blocks, args.labeling, "spectrogram", event_order=order)
    model, history = fit_mdlstm(ds.X, ds.y, ds.n_classes, _train_cfg(args, seed))
    out = Path(args.out or "model.json")
    ckpt = json.loads(model.to_json())
    ckpt.update({"classes": ds.class_names, "labeling": args.labeling, "seed": seed,
                 "loss_history": history, "args": _echo(args)})
    _write(out, json.dumps(ckpt, sort_keys=True))
    print(f"trained on {len(ds)} instances, final loss {history[-1]:.4f}; wrote {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .learn.data import FEATURE_NAMES, make_dataset
    from .learn.evaluate import METHOD_INPUTS, EvalConfig, evaluate, format_table

    seed = _seed(args)
    if args.k is not None and args.k < 1:
        raise ConfigurationError(f"--k must be >= 1, got {args.k}")
    methods = list(ALL_METHODS) if args.all else [args.method]
    labelings = ["event", "subjective", "objective"] if args.all else [args.labeling]
    grids = {}
    if args.k is not None:
        grids["knn"] = {"k": [args.k]}
    cfg = EvalConfig(train=_train_cfg(args, seed), grids=grids, seed=seed)
    features = tuple(args.features.split(",")) if args.features else FEATURE_NAMES
    blocks, classes = _load_blocks(args)
    reports = []
    for lab in labelings:
        for m in methods:
            order = classes if lab == "event" else None
            ds = make_dataset(blocks, lab, METHOD_INPUTS[m], feature_names=features, event_order=order)
            if m == "knn" and args.k is not None:
                max_train = min(len(ds) - sum(1 for i in ds.instances if i.subject_id == s) for s in ds.subjects)
                if args.k > max_train:
                    raise ConfigurationError(f"--k {args.k} exceeds the smallest training fold ({max_train})")
            reports.append(evaluate(ds, m, cfg))
    out = Path(args.out) if args.out else None
    payload = {
        "reports": [r.to_dict() for r in reports],
        "seed": seed,
        "args": _echo(args),
        "version": __version__,
    }
    if out:
        _write(out, json.dumps(payload, indent=2, sort_keys=True))
    print(format_table(reports))
    for r in reports:
        accs = ", ".join(f"{a:.3f}" for a in r.fold_accuracies)
        print(f"{r.method}/{r.labeling}: mean {r.mean_accuracy:.4f} over {len(r.folds)} folds [{accs}]")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_window_flags(p):
    g = p.add_argument_group("spectrogram")
    g.add_argument("--win-len-s", type=float, default=61.0)
    g.add_argument("--step-s", type=float, default=1.0)
    g.add_argument("--f-lo-bpm", type=float, default=2.0)
    g.add_argument("--f-hi-bpm", type=float, default=25.0)
    g.add_argument("--n-freqs", type=int, default=93)
    g.add_argument("--sigma-s", type=float, default=None, help="Gaussian taper sigma (default win/6)")
    g.add_argument("--detrend-s", type=float, default=30.0,
                   help="moving-average width removed before windowing")


def _add_metric_flags(p):
    g = p.add_argument_group("metrics")
    g.add_argument("--bins", type=int, default=256)
    g.add_argument("--threshold-scale", type=float, default=4.0)
    g.add_argument("--hysteresis-frac", type=float, default=0.5)
    g.add_argument("--min-gap-s", type=float, default=0.2)
    g.add_argument("--blink-detrend-s", type=float, default=1.0,
                   help="moving-average width removed before blink detection")


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--hidden", type=int, default=16)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--epochs", type=int, default=100)
    g.add_argument("--batch-size", type=int, default=1)
    g.add_argument("--clip", type=float, default=5.0)
    g.add_argument("--pooling", choices=("mean", "last"), default="mean")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blinkflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"blinkflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrogram", help="blink spectrogram of one series file")
    p.add_argument("input")
    p.add_argument("--out", help="output directory (default: next to the input)")
    p.add_argument("--pgm", action="store_true", help="also write a P2 greyscale image")
    p.add_argument("--seed", type=int, default=None)
    _add_window_flags(p)
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("metrics", help="BR, BD and BE per block")
    p.add_argument("input", help="series file or directory of series files")
    p.add_argument("--out", help="metrics CSV path (default: stdout only)")
    p.add_argument("--seed", type=int, default=None)
    _add_window_flags(p)
    _add_metric_flags(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--subjects", type=int, default=12)
    p.add_argument("--classes", default="periodic,irregular")
    p.add_argument("--blocks-per-class", type=int, default=1)
    p.add_argument("--duration-s", type=float, default=None)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("train", cmd_train, "train the 2D LSTM on a whole cohort"),
        ("evaluate", cmd_evaluate, "leave-one-subject-out evaluation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("manifest")
        p.add_argument("--labeling", choices=("event", "subjective", "objective"), default="event")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out")
        _add_window_flags(p)
        _add_metric_flags(p)
        _add_train_flags(p)
        if name == "evaluate":
            p.add_argument("--method", choices=ALL_METHODS, default="mdlstm2d")
            p.add_argument("--all", action="store_true", help="every method x labeling")
            p.add_argument("--k", type=int, default=None, help="fixed k for knn (disables its grid search)")
            p.add_argument("--features", default=None, help="comma list from br,bd,be (default all)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateLabelingError as exc:
        code, msg = EXIT_LABEL, exc
    except (TrainingFailureError, NumericOverflowError) as exc:
        code, msg = EXIT_TRAIN, exc
    except InsufficientDataError as exc:
        code, msg = EXIT_DATA, exc
    except _IOFailure as exc:
        code, msg = EXIT_IO, exc
    except (ParseError, ConfigurationError, LabelingError, BlinkflowError) as exc:
        code, msg = EXIT_PARSE, exc
    except OSError as exc:
        code, msg = EXIT_IO, exc
    print(f"blinkflow: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
