"""Tests for models and config."""

from pathlib import Path

import pytest

from posetryon.errors import ConfigurationError
from posetryon.models import (
    EvalRow,
    GarmentKind,
    LossRecord,
    ManifestEntry,
    MotionProfile,
    Phase,
    SceneSpec,
    Split,
    TrainMode,
)
from posetryon.utils.config import Settings, config_path, setting_sources, write_config


class TestModels:
    """Tests for Pydantic data models."""

    def test_enums(self) -> None:
        assert GarmentKind.DRESS.value == "dress"
        assert MotionProfile.RAISE_ARMS in list(MotionProfile)
        assert Phase("video") is Phase.VIDEO
        assert TrainMode.JOINT.value == "joint"

    def test_manifest_line(self) -> None:
        entry = ManifestEntry(
            sample_dir="sample_0003", garment_kind=GarmentKind.LOWER, num_frames=8, split=Split.TEST
        )
        assert entry.to_line() == "sample_0003 lower 8 test"

    def test_loss_record_row(self) -> None:
        record = LossRecord(iteration=3, phase=Phase.VIDEO, ldm=0.5, tra=0.25, total=0.50025)
        assert record.to_csv_row() == "3,video,0.5,0.25,0.50025"

    def test_eval_row(self) -> None:
        row = EvalRow(sample_id="s", ssim=1.0, flicker_raw=0.0, flicker_excess=0.0, tra_stat=0.5)
        assert row.to_csv_row() == "s,1.000000,0.000000,0.000000,0.5"

    def test_scene_palette_range(self) -> None:
        with pytest.raises(ValueError):
            SceneSpec(seed=0, num_frames=1, palette=((2.0, 0.0, 0.0),) * 3)


class TestSettings:
    """Tests for the ``Settings`` loader."""

    def test_defaults(self, tmp_path: Path) -> None:
        settings = Settings.load(base_path=tmp_path)
        assert settings.sample.guidance == 1.5
        assert settings.diffusion.num_steps == 1000
        assert settings.train.lambda_video == 1e-3
        assert settings.train.lambda_image == 0.0
        assert settings.model.shift_frames == 1

    def test_overrides_dotted_and_nested(self, tmp_path: Path) -> None:
        settings = Settings.load(
            {"train.batch_size": 2, "model": {"heads": 2}}, base_path=tmp_path
        )
        assert settings.train.batch_size == 2
        assert settings.model.heads == 2

    def test_environment(self, tmp_path: Path, monkeypatch) -> None:
        monkeypatch.setenv("POSETRYON_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("POSETRYON_DETERMINISTIC", "1")
        settings = Settings.load(base_path=tmp_path)
        assert settings.log_level == "DEBUG"
        assert settings.deterministic is True

    def test_external_deterministic_switch(self, tmp_path: Path, monkeypatch) -> None:
        monkeypatch.setenv("DPIDM_DETERMINISTIC", "1")
        assert Settings.load(base_path=tmp_path).deterministic is True
        monkeypatch.setenv("POSETRYON_DETERMINISTIC", "0")
        assert Settings.load(base_path=tmp_path).deterministic is False

    def test_override_beats_environment(self, tmp_path: Path, monkeypatch) -> None:
        monkeypatch.setenv("POSETRYON_DEVICE", "cuda")
        assert Settings.load({"device": "cpu"}, base_path=tmp_path).device == "cpu"

    def test_config_table(self, tmp_path: Path) -> None:
        config_path(tmp_path).write_text(
            '[posetryon]\nlog_level = "ERROR"\ntrain.clip_length = 4\n\n'
            "[posetryon.sample]\nsteps = 7\n",
            encoding="utf-8",
        )
        settings = Settings.load(base_path=tmp_path)
        assert settings.log_level == "ERROR"
        assert settings.train.clip_length == 4
        assert settings.sample.steps == 7

    def test_flat_config_file(self, tmp_path: Path) -> None:
        path = tmp_path / "run.toml"
        path.write_text("[model]\nwidths = [8, 16]\nattention_stages = [0, 1]\n", encoding="utf-8")
        assert Settings.load(config_file=path).model.widths == [8, 16]

    def test_write_config_round_trip(self, tmp_path: Path) -> None:
        settings = Settings.load({"train.clip_length": 4, "sample.window": 6}, base_path=tmp_path)
        path = write_config(settings, tmp_path / "out.toml")
        assert Settings.load(config_file=path) == settings

    def test_unknown_key(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigurationError, match="train.bogus"):
            Settings.load({"train.bogus": 1}, base_path=tmp_path)

    def test_invalid_value(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigurationError, match="divisible"):
            Settings.load({"data.canvas_height": 62}, base_path=tmp_path)

    def test_missing_config_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigurationError, match="not found"):
            Settings.load(config_file=tmp_path / "absent.toml")

    def test_malformed_config_file(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.toml"
        path.write_text("[posetryon\n", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="Malformed"):
            Settings.load(config_file=path)

    def test_resolved_window_and_stride(self, tmp_path: Path) -> None:
        settings = Settings.load({"train.clip_length": 6}, base_path=tmp_path)
        assert settings.resolved_window() == 6
        assert settings.resolved_stride() == 3
        explicit = Settings.load({"sample.window": 5, "sample.stride": 2}, base_path=tmp_path)
        assert explicit.resolved_window() == 5
        assert explicit.resolved_stride() == 2

    def test_setting_sources(self, tmp_path: Path, monkeypatch) -> None:
        config_path(tmp_path).write_text("[posetryon]\ntrain.seed = 4\n", encoding="utf-8")
        monkeypatch.setenv("POSETRYON_DEVICE", "cpu")
        sources = setting_sources({"sample.steps": 3}, base_path=tmp_path)
        assert sources == {
            "train.seed": "file (posetryon.toml)",
            "device": "env (POSETRYON_DEVICE)",
            "sample.steps": "override",
        }
