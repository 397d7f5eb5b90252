"""Tests for the CLI entry point."""

from pathlib import Path

from click.testing import CliRunner

from posetryon.cli import main
from posetryon.metrics import EVAL_HEADER
from posetryon.network.denoiser import TryOnDenoiser
from posetryon.synth.dataset import read_manifest
from posetryon.utils.config import Settings, write_config

from tests.conftest import tiny_settings_dict

runner = CliRunner()


def _tree(root: Path) -> dict[str, bytes]:
    files = sorted(p for p in root.rglob("*") if p.is_file())
    return {str(p.relative_to(root)): p.read_bytes() for p in files}


def _make_data(out: Path, *extra: str) -> None:
    result = runner.invoke(
        main, ["make-data", "--out", str(out), "--size", "32x24", "--frames", "4", *extra]
    )
    assert result.exit_code == 0, result.output


class TestCLI:
    """Tests for the top-level group."""

    def test_version(self) -> None:
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.output

    def test_help(self) -> None:
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        assert "PoseTryOn" in result.output
        for command in ("make-data", "train", "sample", "eval", "inspect", "config"):
            assert command in result.output

    def test_no_command_shows_help(self) -> None:
        result = runner.invoke(main, [])
        assert result.exit_code == 0
        assert "Commands:" in result.output


class TestMakeData:
    """Tests for ``make-data``."""

    def test_zero_count(self, tmp_path: Path) -> None:
        _make_data(tmp_path / "ds", "--count", "0")
        assert read_manifest(tmp_path / "ds") == []

    def test_deterministic_trees(self, tmp_path: Path) -> None:
        _make_data(tmp_path / "a", "--count", "4", "--seed", "7")
        _make_data(tmp_path / "b", "--count", "4", "--seed", "7")
        assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
        assert len(read_manifest(tmp_path / "a")) == 4

    def test_prints_manifest_path(self, tmp_path: Path) -> None:
        result = runner.invoke(
            main, ["make-data", "-o", str(tmp_path), "-n", "1", "--size", "32x24", "-t", "1"]
        )
        assert result.exit_code == 0
        assert result.output.strip().endswith("manifest.txt")

    def test_indivisible_size(self, tmp_path: Path) -> None:
        result = runner.invoke(main, ["make-data", "--out", str(tmp_path), "--size", "63x48"])
        assert result.exit_code == 2
        assert "divisible" in result.output

    def test_test_count_exceeds_count(self, tmp_path: Path) -> None:
        result = runner.invoke(
            main, ["make-data", "--out", str(tmp_path), "--count", "1", "--test-count", "2"]
        )
        assert result.exit_code == 2


class TestTrain:
    """Tests for ``train`` and ``inspect``."""

    def test_missing_data(self, tmp_path: Path) -> None:
        result = runner.invoke(main, ["train", "--data", str(tmp_path / "missing")])
        assert result.exit_code == 2

    def test_unknown_config_key(self, tmp_path: Path, tiny_dataset: Path) -> None:
        config = tmp_path / "bad.toml"
        config.write_text("[posetryon]\ntrain.bogus_key = 3\n", encoding="utf-8")
        result = runner.invoke(
            main, ["train", "--data", str(tiny_dataset), "--config", str(config)]
        )
        assert result.exit_code == 2
        assert "bogus_key" in result.output

    def test_empty_dataset(self, tmp_path: Path, tiny_config: Path) -> None:
        _make_data(tmp_path / "ds", "--count", "0")
        result = runner.invoke(
            main, ["train", "-d", str(tmp_path / "ds"), "-c", str(tiny_config), "-o", str(tmp_path)]
        )
        assert result.exit_code == 2

    def test_smoke_then_inspect(
        self, tmp_path: Path, tiny_dataset: Path, tiny_config: Path
    ) -> None:
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            ["train", "-d", str(tiny_dataset), "-c", str(tiny_config), "-o", str(out)]
            + ["--iters", "2"],
        )
        assert result.exit_code == 0, result.output
        ckpt = out / "final.ckpt"
        assert ckpt.is_file()
        assert (out / "train_log.csv").read_text(encoding="utf-8").count("\n") == 3

        result = runner.invoke(main, ["inspect", "--ckpt", str(ckpt), "--limit", "3"])
        assert result.exit_code == 0
        assert "iteration 2" in result.output
        assert "more" in result.output

    def test_corrupt_checkpoint(self, tmp_path: Path) -> None:
        ckpt = tmp_path / "broken.ckpt"
        ckpt.write_bytes(b"PTRYCKPT\x01\x00")
        result = runner.invoke(main, ["inspect", "--ckpt", str(ckpt)])
        assert result.exit_code == 4


class TestSample:
    """Tests for ``sample``."""

    def _video(self, dataset: Path) -> Path:
        return dataset / read_manifest(dataset)[0].sample_dir

    def test_outputs_are_reproducible(
        self, tmp_path: Path, tiny_checkpoint: Path, tiny_dataset: Path
    ) -> None:
        trees = []
        for name in ("first", "second"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                [
                    "sample",
                    "--ckpt", str(tiny_checkpoint),
                    "--video", str(self._video(tiny_dataset)),
                    "--out", str(out),
                    "--seed", "3",
                ],
            )
            assert result.exit_code == 0, result.output
            assert result.output.strip().endswith("contact_sheet.png")
            trees.append(_tree(out))
        assert trees[0] == trees[1]
        assert sorted(trees[0]) == [
            "contact_sheet.png",
            "frame_0000.png",
            "frame_0001.png",
            "frame_0002.png",
            "frame_0003.png",
        ]

    def test_incompatible_config_names_parameter(
        self, tmp_path: Path, tiny_checkpoint: Path, tiny_dataset: Path
    ) -> None:
        values = tiny_settings_dict()
        values["model"]["widths"] = [16, 32]
        config = write_config(Settings.from_dict(values), tmp_path / "wide.toml")
        result = runner.invoke(
            main,
            [
                "sample",
                "--ckpt", str(tiny_checkpoint),
                "--video", str(self._video(tiny_dataset)),
                "--out", str(tmp_path / "out"),
                "--config", str(config),
            ],
        )
        assert result.exit_code == 4
        narrow = TryOnDenoiser(Settings.from_dict(tiny_settings_dict()).model).state_dict()
        first = next(
            n
            for n, t in TryOnDenoiser(Settings.from_dict(values).model).state_dict().items()
            if t.shape != narrow[n].shape
        )
        assert first in result.output

    def test_stride_larger_than_window(
        self, tmp_path: Path, tiny_checkpoint: Path, tiny_dataset: Path
    ) -> None:
        result = runner.invoke(
            main,
            [
                "sample",
                "--ckpt", str(tiny_checkpoint),
                "--video", str(self._video(tiny_dataset)),
                "--out", str(tmp_path),
                "--window", "2",
                "--stride", "3",
            ],
        )
        assert result.exit_code == 2


class TestEval:
    """Tests for ``eval``."""

    def test_ground_truth_bypass(self, tmp_path: Path, tiny_dataset: Path) -> None:
        out = tmp_path / "eval.csv"
        result = runner.invoke(
            main, ["eval", "--data", str(tiny_dataset), "--out", str(out), "--ground-truth"]
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == EVAL_HEADER
        assert len(lines) == 2
        _, ssim, _, excess, _ = lines[1].split(",")
        assert float(ssim) == 1.0
        assert float(excess) == 0.0
        assert "mean_ssim=1.000000" in result.output

    def test_empty_split_writes_header(self, tmp_path: Path) -> None:
        _make_data(tmp_path / "ds", "--count", "2")
        out = tmp_path / "eval.csv"
        result = runner.invoke(
            main, ["eval", "--data", str(tmp_path / "ds"), "--out", str(out), "--ground-truth"]
        )
        assert result.exit_code == 0
        assert out.read_text(encoding="utf-8") == EVAL_HEADER + "\n"

    def test_checkpoint_required(self, tiny_dataset: Path) -> None:
        result = runner.invoke(main, ["eval", "--data", str(tiny_dataset)])
        assert result.exit_code == 2

    def test_with_checkpoint(
        self, tmp_path: Path, tiny_checkpoint: Path, tiny_dataset: Path
    ) -> None:
        out = tmp_path / "eval.csv"
        result = runner.invoke(
            main,
            ["eval", "--ckpt", str(tiny_checkpoint), "--data", str(tiny_dataset)]
            + ["--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert len(out.read_text(encoding="utf-8").splitlines()) == 2


class TestConfigCommands:
    """Tests for the config subcommands."""

    def test_config_help(self) -> None:
        result = runner.invoke(main, ["config", "--help"])
        assert result.exit_code == 0
        assert "init" in result.output
        assert "show" in result.output

    def test_init_writes_defaults(self) -> None:
        with runner.isolated_filesystem():
            result = runner.invoke(main, ["config", "init"])
            assert result.exit_code == 0
            assert Settings.load(config_file="posetryon.toml") == Settings()

    def test_init_no_overwrite(self) -> None:
        with runner.isolated_filesystem():
            Path("posetryon.toml").write_text('[posetryon]\nlog_level = "ERROR"\n')
            result = runner.invoke(main, ["config", "init"])
            assert result.exit_code == 0
            assert "already exists" in result.output
            assert "ERROR" in Path("posetryon.toml").read_text()

    def test_init_force_overwrite(self) -> None:
        with runner.isolated_filesystem():
            Path("posetryon.toml").write_text('[posetryon]\nlog_level = "ERROR"\n')
            result = runner.invoke(main, ["config", "init", "--force"])
            assert result.exit_code == 0
            assert "ERROR" not in Path("posetryon.toml").read_text()

    def test_show_reports_sources(self, tiny_config: Path) -> None:
        result = runner.invoke(main, ["config", "show", "--config", str(tiny_config)])
        assert result.exit_code == 0
        assert "train.clip_length" in result.output
        assert "tiny.toml" in result.output

    def test_show_env_override(self, monkeypatch) -> None:
        monkeypatch.setenv("POSETRYON_LOG_LEVEL", "ERROR")
        with runner.isolated_filesystem():
            result = runner.invoke(main, ["config", "show"])
        assert result.exit_code == 0
        assert "POSETRYON_LOG_LEVEL" in result.output
