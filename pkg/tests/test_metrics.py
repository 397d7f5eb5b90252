"""Tests for SSIM, the flicker index, the TRA statistic and evaluation reports."""

import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest
import torch

from posetryon.diffusion.schedule import NoiseSchedule
from posetryon.errors import ShapeError
from posetryon.metrics import (
    EVAL_HEADER,
    MetricsError,
    evaluate_dataset,
    evaluate_sample,
    flicker_index,
    ssim,
    ssim_map,
    summarize,
    tra_statistic,
    video_ssim,
    write_report,
)
from posetryon.models import EvalRow
from posetryon.synth.dataset import write_dataset
from posetryon.synth.generator import random_scene_specs

from tests.conftest import CANVAS


class TestSsim:
    """Tests for ``ssim`` and ``ssim_map``."""

    def test_identical_images(self) -> None:
        a = np.random.default_rng(0).random((3, 16, 16))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_constant_black_vs_white(self) -> None:
        assert ssim(np.zeros((16, 16)), np.ones((16, 16))) < 0.01

    def test_symmetric_and_bounded(self) -> None:
        rng = np.random.default_rng(1)
        a, b = rng.random((3, 16, 12)), rng.random((3, 16, 12))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
        assert ssim(a, b) <= 1.0

    def test_map_is_valid_crop(self) -> None:
        assert ssim_map(np.zeros((3, 16, 12)), np.zeros((3, 16, 12))).shape == (10, 6)

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeError):
            ssim(np.zeros((16, 16)), np.zeros((16, 15)))

    def test_too_small(self) -> None:
        with pytest.raises(ShapeError):
            ssim(np.zeros((6, 16)), np.zeros((6, 16)))

    def test_masked_region_ignores_changes_elsewhere(self) -> None:
        rng = np.random.default_rng(2)
        a = rng.random((16, 16))
        b = a.copy()
        b[:, 10:] = rng.random((16, 6))
        mask = np.zeros((16, 16))
        mask[:, :7] = 1.0
        assert ssim(a, b, mask) == pytest.approx(1.0, abs=1e-12)
        assert ssim(a, b) < 1.0

    def test_mask_without_window_centres(self) -> None:
        mask = np.zeros((16, 16))
        mask[:, :3] = 1.0
        with pytest.raises(MetricsError):
            ssim(np.zeros((16, 16)), np.zeros((16, 16)), mask)

    def test_video_ssim(self) -> None:
        video = np.random.default_rng(3).random((3, 3, 16, 12))
        assert video_ssim(video, video) == pytest.approx(1.0, abs=1e-12)


class TestFlickerIndex:
    """Tests for ``flicker_index``."""

    def _mask(self, t: int = 4) -> np.ndarray:
        return np.ones((t, 1, 16, 16))

    def test_static_video(self) -> None:
        video = np.broadcast_to(np.random.default_rng(0).random((1, 3, 16, 16)), (4, 3, 16, 16))
        raw, excess = flicker_index(video, self._mask())
        assert raw == 0.0 and excess == 0.0

    def test_alternating_frames(self) -> None:
        video = np.stack([np.full((3, 16, 16), float(t % 2)) for t in range(4)])
        truth = np.zeros_like(video)
        raw, excess = flicker_index(video, self._mask(), truth)
        assert raw == pytest.approx(1.0)
        assert excess == pytest.approx(1.0)

    def test_video_equal_to_truth(self) -> None:
        video = np.random.default_rng(1).random((4, 3, 16, 16))
        _, excess = flicker_index(video, self._mask(), video)
        assert excess == 0.0

    def test_brightness_offset_invariance(self) -> None:
        rng = np.random.default_rng(2)
        video, truth = rng.random((4, 3, 16, 16)), rng.random((4, 3, 16, 16))
        raw, excess = flicker_index(video, self._mask(), truth)
        raw2, excess2 = flicker_index(video + 0.25, self._mask(), truth + 0.25)
        assert raw2 == pytest.approx(raw, abs=1e-12)
        assert excess2 == pytest.approx(excess, abs=1e-12)

    def test_union_of_pair_masks(self) -> None:
        video = np.zeros((2, 1, 4, 4))
        video[1, 0, 0, 0] = 1.0
        mask = np.zeros((2, 1, 4, 4))
        mask[0, 0, 0, 0] = 1.0
        mask[1, 0, 0, 1] = 1.0
        raw, _ = flicker_index(video, mask)
        assert raw == pytest.approx(0.5)

    def test_single_frame(self) -> None:
        with pytest.raises(MetricsError):
            flicker_index(np.zeros((1, 3, 8, 8)), np.ones((1, 1, 8, 8)))


class TestTraStatistic:
    """Tests for ``tra_statistic``."""

    def test_identical_frames_give_zero(self, tiny_model, make_conditions) -> None:
        z_t, cond = make_conditions(frames=1)
        frames = 3

        def repeat(x: torch.Tensor) -> torch.Tensor:
            return x.expand(x.shape[0], frames, *x.shape[2:]).contiguous()

        cond = dataclasses.replace(
            cond,
            agnostic_latent=repeat(cond.agnostic_latent),
            mask=repeat(cond.mask),
            human_pose_maps=repeat(cond.human_pose_maps),
        )
        value = tra_statistic(tiny_model, cond, repeat(z_t), NoiseSchedule.linear(50))
        assert value == pytest.approx(0.0, abs=1e-7)

    def test_non_negative(self, tiny_model, make_conditions) -> None:
        z0, cond = make_conditions(batch=2, frames=3, seed=4)
        assert tra_statistic(tiny_model, cond, z0, NoiseSchedule.linear(50), seed=1) >= 0.0

    def test_single_frame_is_zero(self, tiny_model, make_conditions) -> None:
        z0, cond = make_conditions(frames=1)
        assert tra_statistic(tiny_model, cond, z0, NoiseSchedule.linear(50)) == 0.0


class TestReport:
    """Tests for dataset evaluation and the CSV report."""

    def test_ground_truth_bypass(self, tiny_dataset: Path, tiny_settings) -> None:
        rows = evaluate_dataset(tiny_dataset, None, tiny_settings, ground_truth=True)
        assert len(rows) == 1
        assert rows[0].ssim == pytest.approx(1.0, abs=1e-9)
        assert rows[0].flicker_excess == 0.0
        assert math.isnan(rows[0].tra_stat)

    def test_empty_test_split(self, tmp_path: Path, tiny_settings) -> None:
        write_dataset(random_scene_specs(2, 0, num_frames=2, canvas_size=CANVAS), tmp_path)
        assert evaluate_dataset(tmp_path, None, tiny_settings) == []
        path = write_report([], tmp_path / "eval.csv")
        assert path.read_text(encoding="utf-8") == EVAL_HEADER + "\n"

    def test_model_row(self, tiny_model, tiny_settings, tiny_sample) -> None:
        row = evaluate_sample("s", tiny_sample, tiny_model, tiny_settings, steps=1)
        assert -1.0 <= row.ssim <= 1.0
        assert row.flicker_raw >= 0.0
        assert row.tra_stat >= 0.0

    def test_model_required_without_bypass(self, tiny_settings, tiny_sample) -> None:
        with pytest.raises(ValueError):
            evaluate_sample("s", tiny_sample, None, tiny_settings)

    def test_report_rows_and_summary(self, tmp_path: Path) -> None:
        rows = [
            EvalRow(sample_id="a", ssim=0.5, flicker_raw=0.1, flicker_excess=0.0, tra_stat=1.0),
            EvalRow(
                sample_id="b", ssim=0.7, flicker_raw=0.3, flicker_excess=0.2, tra_stat=math.nan
            ),
        ]
        lines = write_report(rows, tmp_path / "r.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == EVAL_HEADER
        assert lines[1].startswith("a,0.500000,")
        assert len(lines) == 3
        summary = summarize(rows)
        assert summary["ssim"] == pytest.approx(0.6)
        assert summary["tra_stat"] == 1.0
        assert math.isnan(summarize([])["ssim"])
