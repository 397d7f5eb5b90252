"""Tests for window planning, blending, compositing and the try-on pipeline."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import torch

from posetryon.diffusion.sampler import ddim_sample, initial_noise
from posetryon.diffusion.schedule import NoiseSchedule
from posetryon.errors import ConfigurationError, DataError, MaskError, ShapeError
from posetryon.inference import (
    TryOnPipeline,
    blend_windows,
    composite,
    coverage_counts,
    plan_windows,
    restore_denoiser,
    tryon_video,
    with_garment,
)
from posetryon.synth.dataset import read_manifest
from posetryon.training.batches import encode_batch, sample_batch
from posetryon.utils.imageio import save_png

from tests.conftest import CANVAS, tiny_settings_dict


class TestWindows:
    """Tests for ``plan_windows``, ``coverage_counts`` and ``blend_windows``."""

    def test_overlapping_windows(self) -> None:
        windows = plan_windows(6, 4, 2)
        assert windows == [(0, 4), (2, 6)]
        assert coverage_counts(windows, 6) == [1, 1, 2, 2, 1, 1]

    def test_final_window_right_aligned(self) -> None:
        assert plan_windows(7, 4, 2) == [(0, 4), (2, 6), (3, 7)]

    def test_short_video_single_window(self) -> None:
        assert plan_windows(3, 8, 4) == [(0, 3)]

    def test_stride_exceeds_window(self) -> None:
        with pytest.raises(ConfigurationError, match="exceeds"):
            plan_windows(10, 2, 3)

    def test_empty_video(self) -> None:
        with pytest.raises(ConfigurationError):
            plan_windows(0, 4, 2)

    def test_blend_window_constants(self) -> None:
        windows = plan_windows(6, 4, 2)
        constants = [3.0, 7.0]
        outputs = [(s, torch.full((1, e - s, 2), c)) for (s, e), c in zip(windows, constants)]
        blended = blend_windows(outputs, 6)
        expected = [3.0, 3.0, 5.0, 5.0, 7.0, 7.0]
        assert blended[0, :, 0].tolist() == expected

    def test_blend_uncovered_frame(self) -> None:
        with pytest.raises(ShapeError, match="no window"):
            blend_windows([(0, torch.zeros(1, 2, 3))], 4)

    def test_blend_past_end(self) -> None:
        with pytest.raises(ShapeError):
            blend_windows([(3, torch.zeros(1, 2, 3))], 4)


class TestComposite:
    """Tests for ``composite``."""

    def test_zero_and_one_masks(self) -> None:
        source, generated = torch.rand(2, 3, 4, 4), torch.rand(2, 3, 4, 4)
        assert torch.equal(composite(source, generated, torch.zeros(2, 1, 4, 4)), source)
        assert torch.equal(composite(source, generated, torch.ones(2, 1, 4, 4)), generated)

    def test_half_mask(self) -> None:
        source, generated = torch.rand(1, 3, 4, 4), torch.rand(1, 3, 4, 4)
        mask = torch.zeros(1, 1, 4, 4)
        mask[..., :2] = 1.0
        out = composite(source, generated, mask)
        for x in range(4):
            expected = generated if x < 2 else source
            assert torch.equal(out[..., x], expected[..., x])

    def test_soft_mask(self) -> None:
        with pytest.raises(MaskError):
            soft = torch.full((1, 1, 2, 2), 0.5)
            composite(torch.zeros(1, 3, 2, 2), torch.ones(1, 3, 2, 2), soft)

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeError):
            composite(torch.zeros(1, 3, 2, 2), torch.ones(1, 3, 2, 3), torch.zeros(1, 1, 2, 2))


class TestTryOnPipeline:
    """Tests for ``TryOnPipeline`` on an untrained tiny model."""

    def _pipeline(self, model) -> TryOnPipeline:
        return TryOnPipeline(model.eval(), NoiseSchedule.linear(50))

    def test_single_window_equals_direct_sampling(self, tiny_model, tiny_sample) -> None:
        pipeline = self._pipeline(tiny_model)
        _, cond = encode_batch(sample_batch(tiny_sample), tiny_model.codec)
        latents, windows = pipeline.denoise(cond, window=8, stride=4, steps=2, seed=4)
        assert windows == [(0, 4)]
        noise = initial_noise(tuple(latents.shape), 4)
        direct = ddim_sample(pipeline._eps_fn(cond), noise, pipeline.schedule, 2, 1.5)
        assert torch.equal(latents, direct)

    def test_run_is_deterministic(self, tiny_model, tiny_sample) -> None:
        pipeline = self._pipeline(tiny_model)
        a = pipeline.run(tiny_sample, window=2, stride=1, steps=2, seed=1)
        b = pipeline.run(tiny_sample, window=2, stride=1, steps=2, seed=1)
        assert a.windows == [(0, 2), (1, 3), (2, 4)]
        assert np.array_equal(a.composited, b.composited)
        assert a.composited.shape == (4, 3, *CANVAS)

    def test_unmasked_pixels_copied_from_source(self, tiny_model, tiny_sample) -> None:
        result = self._pipeline(tiny_model).run(tiny_sample, window=4, stride=2, steps=1)
        outside = np.broadcast_to(tiny_sample.agnostic_mask == 0, result.composited.shape)
        assert np.array_equal(result.composited[outside], tiny_sample.source_video[outside])

    def test_seed_changes_output(self, tiny_model, tiny_sample) -> None:
        pipeline = self._pipeline(tiny_model)
        a = pipeline.run(tiny_sample, window=4, stride=2, steps=1, seed=0)
        b = pipeline.run(tiny_sample, window=4, stride=2, steps=1, seed=1)
        assert not np.array_equal(a.generated, b.generated)

    def test_run_never_reads_target(self, tiny_model, tiny_sample) -> None:
        pipeline = self._pipeline(tiny_model)
        blank = replace(tiny_sample, target_video=np.full_like(tiny_sample.target_video, np.nan))
        a = pipeline.run(tiny_sample, window=4, stride=2, steps=1, seed=3)
        b = pipeline.run(blank, window=4, stride=2, steps=1, seed=3)
        assert np.array_equal(a.generated, b.generated)


class TestGarmentSwap:
    """Tests for ``with_garment``."""

    def test_png_gets_neutral_pose(self, tmp_path: Path, tiny_sample) -> None:
        image = np.zeros((3, *CANVAS), dtype=np.float32)
        image[1] = 1.0
        path = save_png(image, tmp_path / "green.png")
        swapped = with_garment(tiny_sample, path)
        assert np.array_equal(swapped.garment_image, image)
        assert swapped.garment_pose.joint_count == tiny_sample.garment_pose.joint_count
        assert np.array_equal(swapped.target_video, tiny_sample.target_video)

    def test_size_mismatch(self, tmp_path: Path, tiny_sample) -> None:
        path = save_png(np.zeros((3, 16, 16), dtype=np.float32), tmp_path / "small.png")
        with pytest.raises(ShapeError):
            with_garment(tiny_sample, path)

    def test_missing_garment(self, tmp_path: Path, tiny_sample) -> None:
        with pytest.raises(DataError):
            with_garment(tiny_sample, tmp_path / "absent.png")


class TestRestoredModel:
    """Tests that go through a trained checkpoint."""

    def test_restore_uses_config_snapshot(self, tiny_checkpoint: Path) -> None:
        model, settings = restore_denoiser(tiny_checkpoint)
        assert settings.model.widths == tiny_settings_dict()["model"]["widths"]
        assert not model.training

    def test_tryon_video(self, tiny_checkpoint: Path, tiny_dataset: Path) -> None:
        model, settings = restore_denoiser(tiny_checkpoint)
        entry = read_manifest(tiny_dataset)[0]
        a = tryon_video(model, settings, tiny_dataset / entry.sample_dir, seed=2)
        b = tryon_video(model, settings, tiny_dataset / entry.sample_dir, seed=2)
        assert a.windows == [(0, 2), (1, 3), (2, 4)]
        assert np.array_equal(a.composited, b.composited)

    def test_missing_video_dir(self, tiny_checkpoint: Path, tmp_path: Path) -> None:
        model, settings = restore_denoiser(tiny_checkpoint)
        with pytest.raises(DataError):
            tryon_video(model, settings, tmp_path / "none")
