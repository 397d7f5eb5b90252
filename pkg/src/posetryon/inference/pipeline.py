"""Video try-on: restore a model, denoise in windows, decode and composite."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from posetryon.diffusion.sampler import ddim_sample, initial_noise
from posetryon.diffusion.schedule import NoiseSchedule
from posetryon.errors import ConfigurationError, DataError, ShapeError
from posetryon.inference.windows import blend_windows, plan_windows
from posetryon.models import Phase
from posetryon.network.codec import LATENT_CHANNELS, check_binary
from posetryon.network.denoiser import DenoiseConditions, TryOnDenoiser
from posetryon.synth.dataset import infer_garment_kind, load_sample_dir
from posetryon.synth.generator import TryOnSample, neutral_garment_pose
from posetryon.training.batches import encode_conditions, sample_batch
from posetryon.training.checkpoint import apply_checkpoint, load_checkpoint
from posetryon.utils.config import Settings
from posetryon.utils.imageio import load_png

logger = logging.getLogger(__name__)


def restore_denoiser(
    ckpt_path: str | Path,
    *,
    config_file: str | Path | None = None,
    device: torch.device | str = "cpu",
) -> tuple[TryOnDenoiser, Settings]:
    """Build a model from a checkpoint's config snapshot (or ``config_file``) and load it."""
    container = load_checkpoint(ckpt_path)
    if config_file is not None:
        settings = Settings.load(config_file=config_file)
    else:
        settings = Settings.from_dict(container.config)
    model = TryOnDenoiser(settings.model)
    apply_checkpoint(container, model)
    model.to(device).eval()
    return model, settings


def composite(source: torch.Tensor, generated: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Generated pixels inside the binary mask, source pixels everywhere else."""
    if source.shape != generated.shape:
        raise ShapeError(f"source {list(source.shape)} != generated {list(generated.shape)}")
    if mask.shape[-2:] != source.shape[-2:] or mask.shape[:-3] != source.shape[:-3]:
        raise ShapeError(f"mask {list(mask.shape)} does not match video {list(source.shape)}")
    check_binary(mask, "composite mask")
    return torch.where(mask.bool(), generated, source)


@dataclass
class TryOnResult:
    """Decoded try-on output; videos are ``[T, 3, H, W]`` in [0, 1]."""

    generated: np.ndarray
    composited: np.ndarray
    latents: torch.Tensor
    windows: list[tuple[int, int]]


class TryOnPipeline:
    """Sliding-window DDIM sampling with classifier-free guidance."""

    def __init__(
        self,
        model: TryOnDenoiser,
        schedule: NoiseSchedule,
        *,
        device: torch.device | str = "cpu",
    ) -> None:
        self.model = model
        self.schedule = schedule
        self.device = torch.device(device)

    @classmethod
    def from_settings(cls, model: TryOnDenoiser, settings: Settings) -> "TryOnPipeline":
        d = settings.diffusion
        schedule = NoiseSchedule.linear(d.num_steps, d.beta_start, d.beta_end)
        return cls(model, schedule, device=next(model.parameters()).device)

    def _eps_fn(self, cond: DenoiseConditions):
        batch = cond.agnostic_latent.shape[0]

        def eps_fn(z: torch.Tensor, t: int, conditional: bool) -> torch.Tensor:
            timesteps = torch.full((batch,), t, dtype=torch.long, device=z.device)
            keep = torch.full((batch,), 1.0 if conditional else 0.0, device=z.device)
            eps, _ = self.model(z, timesteps, cond, mode=Phase.VIDEO, garment_keep=keep)
            return eps

        return eps_fn

    @torch.no_grad()
    def denoise(
        self,
        cond: DenoiseConditions,
        *,
        window: int,
        stride: int,
        steps: int,
        guidance: float = 1.5,
        seed: int = 0,
    ) -> tuple[torch.Tensor, list[tuple[int, int]]]:
        """Sample clean latents ``[B, T, 4, h, w]`` for the whole video.

        Every window starts from the slice of one per-frame noise tensor, so
        overlapping windows see the same initial noise on shared frames.
        """
        b, length = cond.agnostic_latent.shape[:2]
        spatial = cond.agnostic_latent.shape[-2:]
        windows = plan_windows(length, window, stride)
        noise = initial_noise((b, length, LATENT_CHANNELS, *spatial), seed).to(self.device)
        outputs = []
        for start, stop in windows:
            cond_w = cond.frames(start, stop)
            z0 = ddim_sample(
                self._eps_fn(cond_w), noise[:, start:stop], self.schedule, steps, guidance
            )
            outputs.append((start, z0))
            logger.debug("window [%d, %d) done", start, stop)
        return blend_windows(outputs, length), windows

    @torch.no_grad()
    def run(
        self,
        sample: TryOnSample,
        *,
        window: int,
        stride: int,
        steps: int,
        guidance: float = 1.5,
        seed: int = 0,
    ) -> TryOnResult:
        """Dress ``sample``'s person in ``sample``'s garment image."""
        self.model.eval()
        batch = sample_batch(sample)
        cond = encode_conditions(batch, self.model.codec, self.device)
        latents, windows = self.denoise(
            cond, window=window, stride=stride, steps=steps, guidance=guidance, seed=seed
        )
        generated = self.model.codec.decode(latents).clamp(0.0, 1.0)[0]
        source = torch.from_numpy(sample.source_video).to(generated)
        mask = torch.from_numpy(sample.agnostic_mask).to(generated)
        merged = composite(source, generated, mask)
        return TryOnResult(
            generated=generated.cpu().numpy(),
            composited=merged.cpu().numpy(),
            latents=latents.cpu(),
            windows=windows,
        )


def with_garment(sample: TryOnSample, garment: str | Path) -> TryOnSample:
    """Replace the garment of ``sample`` with a garment PNG or another sample's garment.

    A bare PNG gets the neutral flat-lay landmarks of the video's garment kind.
    """
    path = Path(garment)
    if path.is_dir():
        kind = infer_garment_kind(path)
        if kind is not sample.garment_kind:
            raise ConfigurationError(
                f"garment kind {kind.value} does not match video garment kind "
                f"{sample.garment_kind.value}"
            )
        other = load_sample_dir(path, kind)
        image, pose = other.garment_image, other.garment_pose
    elif path.is_file():
        image = load_png(path)
        pose = neutral_garment_pose(sample.garment_kind, sample.canvas_size)
    else:
        raise DataError(f"Garment not found: {path}")
    if image.shape != sample.garment_image.shape:
        raise ShapeError(
            f"garment image {list(image.shape)} does not match video frames "
            f"{list(sample.garment_image.shape)}"
        )
    return dataclasses.replace(sample, garment_image=image, garment_pose=pose)


def tryon_video(
    model: TryOnDenoiser,
    settings: Settings,
    video_dir: str | Path,
    garment: str | Path | None = None,
    *,
    window: int | None = None,
    stride: int | None = None,
    steps: int | None = None,
    guidance: float | None = None,
    seed: int | None = None,
) -> TryOnResult:
    """Load a sample directory, optionally swap its garment, and run the pipeline."""
    video_dir = Path(video_dir)
    if not video_dir.is_dir():
        raise DataError(f"Video directory not found: {video_dir}")
    sample = load_sample_dir(video_dir, infer_garment_kind(video_dir))
    if garment is not None:
        sample = with_garment(sample, garment)
    s = settings.sample
    win = window or settings.resolved_window()
    pipeline = TryOnPipeline.from_settings(model, settings)
    return pipeline.run(
        sample,
        window=win,
        stride=stride or s.stride or max(1, win // 2),
        steps=steps or s.steps,
        guidance=s.guidance if guidance is None else guidance,
        seed=s.seed if seed is None else seed,
    )
