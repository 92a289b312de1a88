#!/usr/bin/env python3

import json
import tempfile
from pathlib import Path

import pytest

from flowBR.breath_signal import read_signal_csv
from flowBR.cli import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth") / "s18"
    assert main(["--quiet", "synth", "--bpm", "18", "--duration", "10", "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def chest_only_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth") / "noface"
    assert main(["--quiet", "synth", "--bpm", "18", "--duration", "10", "--no-face", "--out", str(out)]) == EXIT_OK
    return out


def test_synth_01(scene_dir, tmp_path):
    assert (scene_dir / "video.y4m").exists()
    assert (scene_dir / "keypoints.json").exists()
    assert (scene_dir / "truth.csv").exists()
    assert len(list((scene_dir / "frames").glob("*.pgm"))) == 300
    assert main(["synth", "--bpm", "0", "--out", str(tmp_path / "zero")]) == EXIT_USAGE
    assert main(["synth", "--format", "avi", "--out", str(tmp_path / "avi")]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["synth"])


def test_estimate_02(scene_dir, tmp_path, capsys):
    signal_path = tmp_path / "signal.csv"
    plot_path = tmp_path / "signal.svg"
    report_path = tmp_path / "report.json"
    code = main(
        [
            "estimate",
            "--video",
            str(scene_dir / "video.y4m"),
            "--keypoints",
            str(scene_dir / "keypoints.json"),
            "--kind",
            "chest_grid",
            "--dump-signal",
            str(signal_path),
            "--plot",
            str(plot_path),
            "--report",
            str(report_path),
        ]
    )
    assert code == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert abs(document["bpm"] - 18.0) <= 1.0
    assert document["kind"] == "chest_grid"
    assert json.loads(report_path.read_text()) == document
    assert plot_path.exists()
    raw, filtered, peaks = read_signal_csv(signal_path)
    assert len(raw) == len(filtered) == 300
    assert len(peaks) == document["n_peaks"]


def test_estimate_03(scene_dir, capsys):
    args = ["--quiet", "estimate", "--video", str(scene_dir / "frames"), "--keypoints", str(scene_dir / "keypoints.json")]
    assert main(args + ["--kind", "chest_points"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args + ["--kind", "chest_points"]) == EXIT_OK
    assert capsys.readouterr().out == first


def test_estimate_04(scene_dir, chest_only_dir, tmp_path):
    video = str(scene_dir / "video.y4m")
    assert main(["estimate", "--video", video, "--keypoints", str(tmp_path / "missing.json")]) == EXIT_ERROR
    no_face = ["--video", str(chest_only_dir / "video.y4m"), "--keypoints", str(chest_only_dir / "keypoints.json")]
    assert main(["estimate"] + no_face + ["--kind", "face_points"]) == EXIT_ERROR
    assert main(["estimate"] + no_face + ["--low", "0.6", "--high", "0.2"]) == EXIT_USAGE
    assert main(["estimate"] + no_face + ["--rows", "1"]) == EXIT_USAGE


def test_track_05(chest_only_dir, tmp_path, capsys):
    args = [
        "track",
        "--video",
        str(chest_only_dir / "video.y4m"),
        "--keypoints",
        str(chest_only_dir / "keypoints.json"),
        "--kind",
        "chest_points",
    ]
    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "frame,point_id,x,y,status"
    assert len(lines) == 1 + 3 * 300
    out = tmp_path / "tracks.csv"
    assert main(args + ["--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines() == lines


def test_eval_06(scene_dir, chest_only_dir, tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    cases = [
        {"video": str(scene_dir / "video.y4m"), "keypoints": str(scene_dir / "keypoints.json"), "truth": str(scene_dir / "truth.csv")},
        {"id": "noface", "video": str(chest_only_dir / "video.y4m"), "keypoints": str(chest_only_dir / "keypoints.json"), "truth_bpm": 18},
    ]
    manifest.write_text(json.dumps({"cases": cases, "defaults": {"kinds": ["face_points", "chest_grid"]}}))
    out = tmp_path / "out"
    assert main(["--quiet", "eval", str(manifest), "--out", str(out)]) == EXIT_PARTIAL
    assert "face_points" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert [(row["case_id"], row["kind"]) for row in report["failures"]] == [("noface", "face_points")]
    assert report["rmse_by_kind"]["chest_grid"] <= 1.0

    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"cases": []}))
    assert main(["eval", str(empty), "--out", str(out)]) == EXIT_USAGE
    assert main(["eval", str(manifest), "--timeout", "-1"]) == EXIT_USAGE


def test_plot_07(scene_dir, tmp_path):
    signal_path = tmp_path / "signal.csv"
    args = ["--quiet", "estimate", "--video", str(scene_dir / "video.y4m"), "--keypoints", str(scene_dir / "keypoints.json")]
    assert main(args + ["--dump-signal", str(signal_path)]) == EXIT_OK
    out = tmp_path / "signal.svg"
    assert main(["plot", "--signal", str(signal_path), "--truth", str(scene_dir / "truth.csv"), "--out", str(out)]) == EXIT_OK
    assert out.read_text().lstrip().startswith("<?xml")
    assert main(["plot", "--signal", str(tmp_path / "none.csv"), "--out", str(out)]) == EXIT_ERROR


if __name__ == "__main__":
    root = Path(tempfile.mkdtemp())
    main(["synth", "--bpm", "18", "--duration", "10", "--out", str(root / "s18")])
    main(["estimate", "--video", str(root / "s18" / "video.y4m"), "--keypoints", str(root / "s18" / "keypoints.json")])
