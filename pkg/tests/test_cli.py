import json

import numpy as np
import pytest

from blinkflow import cli
from blinkflow.errors import TrainingFailureError
from blinkflow.ingest import BlinkSeries, save_series
from blinkflow.synth import SynthConfig, generate


@pytest.fixture
def block_file(tmp_path):
    series, _ = generate(SynthConfig(blink_rate_bpm=12.0), subject_id="S1", block_id="periodic")
    path = tmp_path / "S1__periodic.csv"
    save_series(series, path)
    return path


@pytest.fixture
def small_cohort(tmp_path):
    out = tmp_path / "cohort"
    code = cli.main(["synth", "--subjects", "3", "--duration-s", "70", "--seed", "4", "--out", str(out)])
    assert code == 0
    return out


def test_spectrogram_command(block_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["spectrogram", str(block_file), "--pgm", "--out", str(out), "--seed", "3"]) == 0
    assert "200 x 93" in capsys.readouterr().out
    rows = (out / "S1__periodic.spectrogram.csv").read_text().splitlines()
    assert len(rows) == 201 and len(rows[1].split(",")) == 94
    pgm = (out / "S1__periodic.spectrogram.pgm").read_text().splitlines()
    assert pgm[:3] == ["P2", "93 200", "255"]
    meta = json.loads((out / "S1__periodic.spectrogram.json").read_text())
    assert meta["seed"] == 3 and meta["window_config"]["n_freqs"] == 93


def test_spectrogram_short_file_exit_3(tmp_path):
    path = tmp_path / "short.csv"
    save_series(BlinkSeries(np.arange(301) / 10.0, np.ones(301)), path)
    assert cli.main(["spectrogram", str(path)]) == 3


def test_spectrogram_parse_error_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("t,ear\n0,1\n0.1,x\n")
    assert cli.main(["spectrogram", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_input_exit_4(tmp_path):
    assert cli.main(["metrics", str(tmp_path / "nope.csv")]) == 4


def test_metrics_command(block_file, tmp_path, capsys):
    flat = tmp_path / "S2__flat.csv"
    save_series(BlinkSeries(np.arange(2601) / 10.0, np.ones(2601), "S2", "flat"), flat)
    other, _ = generate(SynthConfig(blink_rate_bpm=8.0, seed=2))
    save_series(other, tmp_path / "S3__slow.csv")
    out = tmp_path / "m.csv"
    assert cli.main(["metrics", str(tmp_path), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "subject,block,br,bd,be"
    assert len(lines) == 4
    rows = {ln.split(",")[0]: [float(x) for x in ln.split(",")[2:]] for ln in lines[1:]}
    assert rows["S1"][0] == pytest.approx(12.0, abs=0.5)
    assert rows["S2"][0] == 0.0 and rows["S2"][2] == 0.0
    assert json.loads(out.with_suffix(".json").read_text())["seed"] == 0
    assert capsys.readouterr().out.splitlines() == lines


def test_synth_is_byte_deterministic(tmp_path, small_cohort):
    again = tmp_path / "again"
    cli.main(["synth", "--subjects", "3", "--duration-s", "70", "--seed", "4", "--out", str(again)])
    files = sorted(p.name for p in small_cohort.iterdir())
    assert len(files) == 7 and "manifest.json" in files
    for name in files:
        if name != "manifest.json":
            assert (small_cohort / name).read_bytes() == (again / name).read_bytes()
    manifest = json.loads((small_cohort / "manifest.json").read_text())
    rerun = json.loads((again / "manifest.json").read_text())
    # only the echoed output path differs
    assert manifest.pop("args").pop("out") != rerun.pop("args").pop("out")
    assert manifest == rerun
    manifest = json.loads((small_cohort / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["args"]["subjects"] == 3


def test_synth_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BLINKFLOW_SEED", "11")
    out = tmp_path / "env"
    assert cli.main(["synth", "--subjects", "2", "--duration-s", "70", "--out", str(out)]) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 11
    monkeypatch.setenv("BLINKFLOW_SEED", "eleven")
    assert cli.main(["synth", "--subjects", "2", "--duration-s", "70", "--out", str(out)]) == 2


def test_synth_errors(tmp_path):
    assert cli.main(["synth", "--subjects", "1", "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["synth", "--classes", "periodic,wobbly", "--out", str(tmp_path / "x")]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["synth", "--subjects", "2", "--duration-s", "70", "--out", str(blocker / "sub")]) == 4


def test_train_command(small_cohort, tmp_path, capsys):
    out = tmp_path / "model.json"
    args = ["train", str(small_cohort / "manifest.json"), "--epochs", "1", "--hidden", "2", "--out", str(out)]
    assert cli.main(args) == 0
    ckpt = json.loads(out.read_text())
    assert ckpt["format_version"] == 1 and ckpt["hidden_size"] == 2
    assert ckpt["classes"] == ["periodic", "irregular"] and ckpt["seed"] == 0


def test_train_failure_exit_6(small_cohort, monkeypatch):
    def boom(*a, **k):
        raise TrainingFailureError("diverged", 0)

    monkeypatch.setattr("blinkflow.learn.mdlstm.fit_mdlstm", boom)
    assert cli.main(["train", str(small_cohort / "manifest.json"), "--epochs", "1"]) == 6


def test_evaluate_knn(small_cohort, tmp_path, capsys):
    out = tmp_path / "report.json"
    args = ["evaluate", str(small_cohort / "manifest.json"), "--method", "knn", "--k", "1", "--out", str(out)]
    assert cli.main(args) == 0
    printed = capsys.readouterr().out
    assert "knn/event: mean" in printed
    report = json.loads(out.read_text())
    assert report["seed"] == 0
    assert len(report["reports"][0]["per_fold"]) == 3


def test_evaluate_bad_k(small_cohort):
    assert cli.main(["evaluate", str(small_cohort / "manifest.json"), "--method", "knn", "--k", "0"]) == 2
    assert cli.main(["evaluate", str(small_cohort / "manifest.json"), "--method", "knn", "--k", "99"]) == 2


def test_evaluate_all_grid(small_cohort, tmp_path, capsys):
    out = tmp_path / "all.json"
    args = ["evaluate", str(small_cohort / "manifest.json"), "--all", "--epochs", "1", "--hidden", "2", "--out",
            str(out)]
    assert cli.main(args) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["method", "event", "subjective", "objective"]
    assert [ln.split()[0] for ln in table[1:6]] == list(cli.ALL_METHODS)
    assert len(json.loads(out.read_text())["reports"]) == 15


def test_evaluate_degenerate_labeling_exit_5(small_cohort):
    manifest = json.loads((small_cohort / "manifest.json").read_text())
    for b in manifest["blocks"]:
        b["aux"]["perceived_difficulty"] = 5.0
    (small_cohort / "manifest.json").write_text(json.dumps(manifest))
    args = ["evaluate", str(small_cohort / "manifest.json"), "--method", "knn", "--labeling", "subjective"]
    assert cli.main(args) == 5


def test_evaluate_bad_manifest(tmp_path):
    bad = tmp_path / "manifest.json"
    bad.write_text("{not json")
    assert cli.main(["evaluate", str(bad)]) == 2
    assert cli.main(["evaluate", str(tmp_path / "missing.json")]) == 4
