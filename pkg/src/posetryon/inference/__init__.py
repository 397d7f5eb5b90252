"""Inference module — sliding windows and the try-on pipeline."""

from posetryon.inference.pipeline import (
    TryOnPipeline,
    TryOnResult,
    composite,
    restore_denoiser,
    tryon_video,
    with_garment,
)
from posetryon.inference.windows import blend_windows, coverage_counts, plan_windows

__all__ = [
    "TryOnPipeline",
    "TryOnResult",
    "blend_windows",
    "composite",
    "coverage_counts",
    "plan_windows",
    "restore_denoiser",
    "tryon_video",
    "with_garment",
]
