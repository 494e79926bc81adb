import orjson
import pytest

import fdp
import formats
from detector import bridge


@pytest.fixture(scope="module")
def synthesized(tmp_path_factory):
    directory = tmp_path_factory.mktemp("synthesized")
    assert fdp.main(["synthesize", "--pages", "2", "--formulas", "2", "--seed", "4", "--output", str(directory)]) == 0
    return directory


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory, synthesized):
    output = tmp_path_factory.mktemp("pipeline")
    argv = ["pipeline", "--images", str(synthesized / "images"), "--ground-truth", str(synthesized / "characters.csv")]
    assert fdp.main([*argv, "--output", str(output)]) == 0
    return output


def test_synthesize_writes_pages_ground_truth_and_manifest(synthesized):
    assert sorted(p.name for p in (synthesized / "images").iterdir()) == ["synthetic_0.png", "synthetic_1.png"]
    with open(synthesized / "ground_truth.csv") as stream:
        lines = stream.read().splitlines()
    assert lines[0] == ",".join(formats.FORMULA_COLUMNS)
    assert len(lines) == 5
    manifest = orjson.loads((synthesized / "run_manifest.json").read_bytes())
    assert manifest["command"] == "synthesize"
    assert str(synthesized / "characters.csv") in manifest["outputs"]


def test_pipeline_detects_and_scores(pipeline_run, synthesized):
    with open(pipeline_run / "detections.csv") as stream:
        assert len(stream.read().splitlines()) == 5
    with open(pipeline_run / "metrics.csv") as stream:
        metrics = stream.read().splitlines()
    assert "all,0.75,1.0000,1.0000,1.0000" in metrics
    assert (pipeline_run / "report.txt").is_file()
    manifest = orjson.loads((pipeline_run / "run_manifest.json").read_bytes())
    assert str(synthesized / "images" / "synthetic_1.png") in manifest["inputs"]


def test_pipeline_prints_the_report(tmp_path, synthesized, capsys):
    argv = ["pipeline", "--images", str(synthesized / "images"), "--ground-truth", str(synthesized / "characters.csv")]
    assert fdp.main([*argv, "--output", str(tmp_path)]) == 0
    assert capsys.readouterr().out == (tmp_path / "report.txt").read_text()


def test_evaluate_scores_a_detection_file(tmp_path, pipeline_run, synthesized):
    argv = [
        "evaluate",
        "--ground-truth",
        str(synthesized / "ground_truth.csv"),
        "--detections",
        str(pipeline_run / "detections.csv"),
        "--output",
        str(tmp_path),
    ]
    assert fdp.main(argv) == 0
    with open(tmp_path / "metrics.csv") as stream:
        assert "all,1.0,1.0000,1.0000,1.0000" in stream.read().splitlines()


def test_detect_then_pool_matches_the_pipeline(tmp_path, pipeline_run, synthesized):
    images = str(synthesized / "images")
    gt = str(synthesized / "characters.csv")
    assert fdp.main(["detect", "--images", images, "--ground-truth", gt, "--output", str(tmp_path / "detect")]) == 0
    assert (tmp_path / "detect" / bridge.MANIFEST_NAME).is_file()
    detections = str(tmp_path / "detect" / "window_detections.csv")
    assert fdp.main(["pool", "--images", images, "--detections", detections, "--output", str(tmp_path / "pool")]) == 0
    pooled = (tmp_path / "pool" / "detections.csv").read_text()
    assert pooled == (pipeline_run / "detections.csv").read_text()


def test_tune_writes_the_search_result(tmp_path, synthesized):
    argv = ["tune", "--images", str(synthesized / "images"), "--ground-truth", str(synthesized / "characters.csv")]
    assert fdp.main([*argv, "--method", "uniform", "--output", str(tmp_path)]) == 0
    result = orjson.loads((tmp_path / "tuning.json").read_bytes())
    assert result["method"] == "uniform"
    assert len(result["curve"]) == 56
    assert result["best_fscore"] == 1.0


def test_stats(tmp_path, synthesized, capsys):
    assert fdp.main(["stats", "--ground-truth", str(synthesized / "ground_truth.csv"), "--output", str(tmp_path)]) == 0
    stats = orjson.loads((tmp_path / "stats.json").read_bytes())["stats"]
    assert (stats["docs"], stats["pages"], stats["total"]) == (1, 2, 4)
    assert "formulas: 4" in capsys.readouterr().out


def test_export_targets(tmp_path, synthesized):
    images, gt = synthesized / "images", synthesized / "ground_truth.csv"
    argv = ["export-targets", "--images", str(images), "--ground-truth", str(gt), "--output", str(tmp_path)]
    assert fdp.main(argv) == 0
    with open(tmp_path / "training_targets.csv") as stream:
        lines = stream.read().splitlines()
    assert lines[0] == ",".join(formats.TRAINING_TARGET_COLUMNS)
    assert len(lines) > 1


def test_tile_exports_every_window(tmp_path, synthesized):
    assert fdp.main(["tile", "--images", str(synthesized / "images"), "--output", str(tmp_path)]) == 0
    with open(tmp_path / bridge.MANIFEST_NAME) as stream:
        assert len(stream.read().splitlines()) == 1 + 2 * 176
    assert len(list((tmp_path / bridge.CROP_DIRECTORY).iterdir())) == 2 * 176


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["stats", "--set", "unknown=1"],
        ["stats", "--set", "vote_threshold"],
        ["stats"],
        ["pipeline", "--workers", "0"],
        ["detect", "--detector", "external"],
    ],
)
def test_usage_errors(tmp_path, argv):
    assert fdp.main([*argv, "--output", str(tmp_path)] if argv else argv) == 1


def test_missing_ground_truth_is_a_data_error(tmp_path):
    argv = ["pipeline", "--ground-truth", str(tmp_path / "missing.csv"), "--output", str(tmp_path)]
    assert fdp.main(argv) == 2


def test_missing_page_images_are_a_data_error(tmp_path, synthesized):
    argv = ["pipeline", "--images", str(tmp_path / "empty"), "--ground-truth", str(synthesized / "characters.csv")]
    assert fdp.main([*argv, "--output", str(tmp_path)]) == 2


def test_command_line_flags_beat_the_configuration_file(tmp_path, synthesized, monkeypatch):
    (tmp_path / "run.env").write_text("CONFIG_SEED=1\n")
    monkeypatch.setenv("CONFIG_SEED", "2")
    argv = ["stats", "--config", str(tmp_path / "run.env"), "--seed", "4"]
    assert fdp.main([*argv, "--ground-truth", str(synthesized / "ground_truth.csv"), "--output", str(tmp_path)]) == 0
    manifest = orjson.loads((tmp_path / "run_manifest.json").read_bytes())
    assert manifest["config"]["seed"] == 4


def test_repeated_runs_write_identical_files(tmp_path, synthesized):
    argv = ["pipeline", "--images", str(synthesized / "images"), "--ground-truth", str(synthesized / "characters.csv")]
    noise = ["--set", "oracle_position_px=6", "--set", "oracle_drop_prob=0.2", "--render-overlays"]
    assert fdp.main([*argv, *noise, "--workers", "1", "--output", str(tmp_path / "first")]) == 0
    assert fdp.main([*argv, *noise, "--workers", "2", "--output", str(tmp_path / "second")]) == 0
    first = sorted(p.relative_to(tmp_path / "first") for p in (tmp_path / "first").rglob("*") if p.is_file())
    second = sorted(p.relative_to(tmp_path / "second") for p in (tmp_path / "second").rglob("*") if p.is_file())
    assert first == second
    assert {"detections.csv", "metrics.csv", "report.txt"} <= {p.name for p in first}
    for relative in first:
        if relative.name != "run_manifest.json":
            assert (tmp_path / "first" / relative).read_bytes() == (tmp_path / "second" / relative).read_bytes()
