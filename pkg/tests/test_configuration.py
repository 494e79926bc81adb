import fractions
import os

import pytest

import configuration
import enums
import exceptions


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for name in list(os.environ):
        if name.startswith("CONFIG_"):
            monkeypatch.delenv(name)


def test_defaults():
    cfg = configuration.load()
    assert (cfg.window_size, cfg.stride, cfg.input_size) == (1200, 120, 512)
    assert cfg.vote_method == enums.VoteMethod.UNIFORM
    assert cfg.vote_threshold == 30
    assert cfg.vote_downscale == 4
    assert cfg.nms_iou == pytest.approx(0.45)
    assert cfg.detector == enums.DetectorKind.ORACLE
    assert cfg.workers == 1
    assert cfg.anchors.preset == "math512"
    assert cfg.anchors.grid_sizes == [64, 32, 16, 8, 4, 2, 1]
    assert cfg.anchors.aspect_ratios == [fractions.Fraction(r) for r in (1, 2, 3, 5, 7, 10)]
    assert cfg.oracle.drop_prob == 0.0


def test_overrides_are_coerced():
    cfg = configuration.load(overrides={"stride": "240", "vote_method": "max", "oracle_drop_prob": "0.3"})
    assert cfg.stride == 240
    assert cfg.vote_method == enums.VoteMethod.MAX
    assert cfg.oracle.drop_prob == pytest.approx(0.3)


def test_anchor_presets_can_be_selected():
    cfg = configuration.load(overrides={"anchor_preset": "ssd512"})
    assert fractions.Fraction(1, 3) in cfg.anchors.aspect_ratios


def test_configuration_files(tmp_path):
    path = tmp_path / "pipeline.env"
    path.write_text("CONFIG_STRIDE=60\nCONFIG_VOTE_THRESHOLD=12.5\nCONFIG_ORACLE_SIZE_PX=4\n")
    cfg = configuration.load(path)
    assert cfg.stride == 60
    assert cfg.vote_threshold == 12.5
    assert cfg.oracle.size_px == 4
    assert configuration.load(path, {"stride": 30}).stride == 30


def test_environment_beats_the_file(tmp_path, monkeypatch):
    path = tmp_path / "pipeline.env"
    path.write_text("CONFIG_STRIDE=60\n")
    monkeypatch.setenv("CONFIG_STRIDE", "90")
    assert configuration.load(path).stride == 90


@pytest.mark.parametrize(
    "overrides, error_code",
    [
        ({"strides": 5}, "UNKNOWN_SETTING"),
        ({"oracle_noise": 5}, "UNKNOWN_SETTING"),
        ({"stride": 2000}, "INVALID_CONFIGURATION"),
        ({"nms_iou": 0}, "INVALID_CONFIGURATION"),
        ({"vote_threshold": -1}, "INVALID_CONFIGURATION"),
        ({"anchor_preset": "yolo"}, "INVALID_CONFIGURATION"),
        ({"anchor_grid_sizes": [4, 8]}, "INVALID_CONFIGURATION"),
    ],
)
def test_invalid_settings_are_usage_errors(overrides, error_code):
    with pytest.raises(exceptions.UsageError) as e:
        configuration.load(overrides=overrides)
    assert e.value.error_code == error_code
    assert e.value.exit_code == enums.ExitCode.USAGE


def test_missing_configuration_file(tmp_path):
    with pytest.raises(exceptions.UsageError) as e:
        configuration.load(tmp_path / "missing.env")
    assert e.value.error_code == "CONFIG_FILE_MISSING"


def test_overrides_beat_the_file_and_the_environment(tmp_path, monkeypatch):
    path = tmp_path / "pipeline.env"
    path.write_text("CONFIG_SEED=1\nCONFIG_ANCHOR_PRESET=math512\nCONFIG_ORACLE_SIZE_PX=4\n")
    monkeypatch.setenv("CONFIG_STRIDE", "90")
    overrides = {"seed": 4, "stride": 60, "anchor_preset": "ssd512", "oracle_size_px": 2}
    cfg = configuration.load(path, overrides)
    assert (cfg.seed, cfg.stride) == (4, 60)
    assert cfg.oracle.size_px == 2
    assert fractions.Fraction(1, 3) in cfg.anchors.aspect_ratios
