"""Command line interface tests: a small end-to-end run, the report
command, and exit code conventions."""

import csv
import json
from pathlib import Path

import pytest

from marginline.cli import main


@pytest.fixture(scope="module")
def small_run(tmp_path_factory, capfd_unsupported=None):
    """One tiny synthetic dataset pushed through the full pipeline."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    run = root / "run"
    assert main(["synth", "--out", str(data), "--cases", "4", "--seed", "5"]) == 0
    code = main(
        [
            "pipeline",
            "--manifest", str(data / "manifest.json"),
            "--run-dir", str(run),
            "--target-faces", "2000",
            "--folds", "2",
            "--epochs", "12",
            "--scale", "0.125",
            "--seed", "1",
        ]
    )
    assert code == 0
    return data, run


def test_synth_layout(small_run):
    data, _ = small_run
    assert (data / "manifest.json").exists()
    for i in range(4):
        assert (data / f"synth{i:03d}_die.stl").exists()
        assert (data / f"synth{i:03d}_crown_bottom.stl").exists()
        assert (data / "truth" / f"synth{i:03d}_margin.json").exists()


def test_pipeline_artifacts(small_run):
    _, run = small_run
    for sub in ("preprocess", "labels", "features", "models",
                "predict", "refine", "margins", "evaluation"):
        assert (run / sub).is_dir()
    assert (run / "models" / "folds.json").exists()
    report = json.loads((run / "evaluation" / "report.json").read_text())
    assert report["summary"]["n_cases"] == 4
    with open(run / "evaluation" / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert set(rows[0]) >= {
        "case_id", "rating", "dsc", "sen", "ppv",
        "max_um", "mean_um", "std_um", "success",
    }


def test_margin_outputs(small_run):
    _, run = small_run
    margins = sorted((run / "margins").glob("*_margin.json"))
    assert len(margins) == 4
    data = json.loads(margins[0].read_text())
    assert data["closed"] is True
    assert data["n"] == len(data["points"])


def test_report_command(small_run, capsys):
    _, run = small_run
    assert main(["report", "--run-dir", str(run)]) == 0
    out = capsys.readouterr().out
    assert "dsc_mean" in out
    assert "success_count" in out


def test_missing_manifest_exit_1(tmp_path, capsys):
    code = main(
        [
            "preprocess",
            "--manifest", str(tmp_path / "nope.json"),
            "--run-dir", str(tmp_path / "run"),
        ]
    )
    assert code == 1
    err = capsys.readouterr().err.strip()
    parsed = json.loads(err.splitlines()[-1])
    assert "error" in parsed and "message" in parsed


def test_report_before_evaluate_exit_1(tmp_path, capsys):
    assert main(["report", "--run-dir", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["pipeline"]) == 2  # missing required arguments
    assert main(["synth", "--out", "x", "--cases", "abc"]) == 2
    capsys.readouterr()


def test_bad_config_value_exit_1(tmp_path, capsys):
    (tmp_path / "a_die.stl").write_bytes(b"\0" * 84)
    code = main(
        [
            "train",
            "--manifest", str(tmp_path),
            "--run-dir", str(tmp_path / "run"),
            "--folds", "1",
        ]
    )
    assert code == 1
    capsys.readouterr()
