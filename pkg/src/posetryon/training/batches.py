"""Assemble image- and video-phase batches from in-memory samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from posetryon.errors import DataError
from posetryon.models import Phase
from posetryon.network.codec import LatentCodec, mask_to_latent
from posetryon.network.denoiser import DenoiseConditions
from posetryon.pose.dropout import drop_keypoints
from posetryon.pose.raster import rasterize
from posetryon.pose.skeleton import SkeletonPose
from posetryon.synth.generator import TryOnSample


@dataclass
class TrainingBatch:
    """Pixel-space tensors of one batch; ``[B, T, ...]`` for per-frame data."""

    target: torch.Tensor
    agnostic: torch.Tensor
    mask: torch.Tensor
    human_pose_maps: torch.Tensor
    garment_pose_map: torch.Tensor
    garment_image: torch.Tensor
    garment_keep: torch.Tensor

    @property
    def batch_size(self) -> int:
        return int(self.target.shape[0])


_POSE_MAPS = ("human_pose_maps", "garment_pose_map")


@dataclass(frozen=True)
class BatchPolicy:
    """Augmentation and condition dropping applied while sampling batches."""

    keypoint_drop_prob: float = 0.0
    garment_cond_drop_prob: float = 0.0
    flip_prob: float = 0.0


def _clip_arrays(
    sample: TryOnSample,
    start: int,
    stop: int,
    policy: BatchPolicy,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    height, width = sample.canvas_size
    flip = bool(rng.random() < policy.flip_prob)

    def prepare(pose: SkeletonPose) -> SkeletonPose:
        if policy.keypoint_drop_prob > 0:
            pose = drop_keypoints(pose, policy.keypoint_drop_prob, rng)
        return pose.flipped(width) if flip else pose

    arrays = {
        "target": sample.target_video[start:stop],
        "agnostic": sample.agnostic_video[start:stop],
        "mask": sample.agnostic_mask[start:stop],
        "human_pose_maps": np.stack(
            [rasterize(prepare(p), (height, width)) for p in sample.human_pose[start:stop]]
        ),
        "garment_pose_map": rasterize(prepare(sample.garment_pose), (height, width)),
        "garment_image": sample.garment_image,
    }
    if flip:
        # pose maps are already rasterized from mirrored skeletons
        arrays = {
            k: v if k in _POSE_MAPS else np.ascontiguousarray(v[..., ::-1])
            for k, v in arrays.items()
        }
    return arrays


def _stack(clips: list[dict[str, np.ndarray]], keep: np.ndarray) -> TrainingBatch:
    fields = {k: torch.from_numpy(np.stack([c[k] for c in clips])) for k in clips[0]}
    return TrainingBatch(**fields, garment_keep=torch.from_numpy(keep.astype(np.float32)))


def make_batch(
    samples: list[TryOnSample],
    phase: Phase,
    batch_size: int,
    clip_length: int,
    rng: np.random.Generator,
    policy: BatchPolicy,
) -> TrainingBatch:
    """Draw ``batch_size`` clips: one random frame each for images, ``clip_length`` for videos."""
    if not samples:
        raise DataError("no samples to draw a batch from")
    length = 1 if phase is Phase.IMAGE else clip_length
    clips = []
    for idx in rng.integers(0, len(samples), size=batch_size):
        sample = samples[int(idx)]
        if sample.num_frames < length:
            raise DataError(
                f"sample {int(idx)} has {sample.num_frames} frames, clips need {length}"
            )
        start = int(rng.integers(0, sample.num_frames - length + 1))
        clips.append(_clip_arrays(sample, start, start + length, policy, rng))
    keep = rng.random(batch_size) >= policy.garment_cond_drop_prob
    return _stack(clips, keep)


def sample_batch(sample: TryOnSample, start: int = 0, stop: int | None = None) -> TrainingBatch:
    """One clip without augmentation or dropping (evaluation and inference)."""
    stop = sample.num_frames if stop is None else stop
    clip = _clip_arrays(sample, start, stop, BatchPolicy(), np.random.default_rng(0))
    return _stack([clip], np.ones(1))


@torch.no_grad()
def encode_conditions(
    batch: TrainingBatch, codec: LatentCodec, device: torch.device | str = "cpu"
) -> DenoiseConditions:
    """Latent conditions only; ``batch.target`` is never read."""
    return DenoiseConditions(
        agnostic_latent=codec.encode(batch.agnostic.to(device)),
        mask=mask_to_latent(batch.mask.to(device)),
        human_pose_maps=batch.human_pose_maps.to(device),
        garment_pose_map=batch.garment_pose_map.to(device),
        garment_latent=codec.encode(batch.garment_image.to(device)),
        garment_image=batch.garment_image.to(device),
    )


@torch.no_grad()
def encode_batch(
    batch: TrainingBatch, codec: LatentCodec, device: torch.device | str = "cpu"
) -> tuple[torch.Tensor, DenoiseConditions]:
    """Move to latent space with the frozen codec.

    Returns:
        ``(z0 [B, T, 4, h, w], conditions)``.
    """
    return codec.encode(batch.target.to(device)), encode_conditions(batch, codec, device)
