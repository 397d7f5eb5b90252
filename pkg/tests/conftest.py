"""Shared fixtures: a tiny model configuration and small synthetic samples."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import pytest
import torch

from posetryon.models import GarmentKind, MotionProfile, SceneSpec
from posetryon.network.denoiser import DenoiseConditions, TryOnDenoiser
from posetryon.pose.skeleton import POSE_CHANNELS
from posetryon.synth.dataset import write_dataset
from posetryon.synth.generator import TryOnSample, generate_sample, random_scene_specs
from posetryon.training.trainer import train
from posetryon.utils.config import Settings, write_config

CANVAS = (32, 24)
LATENT = (8, 6)

TINY_MODEL = {
    "widths": [8, 16],
    "attention_stages": [0, 1],
    "heads": 2,
    "pose_dim": 8,
    "pose_encoder_widths": [8, 8, 8],
    "context_dim": 8,
    "codec_width": 8,
}


def tiny_settings_dict() -> dict:
    return {
        "data": {"canvas_height": CANVAS[0], "canvas_width": CANVAS[1], "num_frames": 4},
        "model": dict(TINY_MODEL),
        "diffusion": {"num_steps": 50},
        "train": {
            "batch_size": 2,
            "clip_length": 2,
            "total_iters": 4,
            "codec_iters": 2,
            "codec_batch_size": 4,
            "checkpoint_interval": 0,
            "log_every": 1,
        },
        "sample": {"steps": 2},
    }


@pytest.fixture()
def tiny_settings() -> Settings:
    return Settings.from_dict(tiny_settings_dict())


@pytest.fixture()
def tiny_model(tiny_settings: Settings) -> TryOnDenoiser:
    torch.manual_seed(0)
    return TryOnDenoiser(tiny_settings.model)


@pytest.fixture(scope="session")
def tiny_sample() -> TryOnSample:
    spec = SceneSpec(
        seed=3,
        num_frames=4,
        canvas_size=CANVAS,
        motion_profile=MotionProfile.WALK,
        garment_kind=GarmentKind.UPPER,
    )
    return generate_sample(spec)


@pytest.fixture()
def make_conditions() -> Callable[..., tuple[torch.Tensor, DenoiseConditions]]:
    """Factory for random ``(z_t, conditions)`` at the tiny canvas size."""

    def build(
        batch: int = 1, frames: int = 2, *, seed: int = 0, dtype: torch.dtype = torch.float32
    ) -> tuple[torch.Tensor, DenoiseConditions]:
        g = torch.Generator().manual_seed(seed)
        h, w = LATENT

        def randn(*shape: int) -> torch.Tensor:
            return torch.randn(shape, generator=g, dtype=dtype)

        def rand(*shape: int) -> torch.Tensor:
            return torch.rand(shape, generator=g, dtype=dtype)

        z_t = randn(batch, frames, 4, h, w)
        cond = DenoiseConditions(
            agnostic_latent=randn(batch, frames, 4, h, w),
            mask=(rand(batch, frames, 1, h, w) < 0.5).to(dtype),
            human_pose_maps=rand(batch, frames, POSE_CHANNELS, *CANVAS),
            garment_pose_map=rand(batch, POSE_CHANNELS, *CANVAS),
            garment_latent=randn(batch, 4, h, w),
            garment_image=rand(batch, 3, *CANVAS),
        )
        return z_t, cond

    return build


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Three 4-frame samples at the tiny canvas; the last one is held out."""
    root = tmp_path_factory.mktemp("dataset")
    write_dataset(random_scene_specs(3, 5, num_frames=4, canvas_size=CANVAS), root, test_count=1)
    return root


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_dataset: Path, tmp_path_factory: pytest.TempPathFactory) -> Path:
    """``final.ckpt`` of a four-iteration run on ``tiny_dataset``."""
    out = tmp_path_factory.mktemp("run")
    return train(tiny_dataset, Settings.from_dict(tiny_settings_dict()), out).checkpoint


@pytest.fixture()
def tiny_config(tmp_path: Path) -> Path:
    """The tiny settings written as a config file."""
    return write_config(Settings.from_dict(tiny_settings_dict()), tmp_path / "tiny.toml")
