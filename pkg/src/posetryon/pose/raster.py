"""Rasterize skeleton poses into conditioning maps."""

from __future__ import annotations

import numpy as np

from posetryon.pose.skeleton import EDGES, NUM_JOINTS, POSE_CHANNELS, SkeletonPose

JOINT_SIGMA = 2.0
LIMB_THICKNESS = 1.5


def _segment_distance(
    xx: np.ndarray, yy: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(xx - a[0], yy - a[1])
    u = np.clip(((xx - a[0]) * ab[0] + (yy - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(xx - (a[0] + u * ab[0]), yy - (a[1] + u * ab[1]))


def rasterize(pose: SkeletonPose, size: tuple[int, int]) -> np.ndarray:
    """Render ``pose`` as a ``[POSE_CHANNELS, H, W]`` float32 map in [0, 1].

    Channels ``0..12`` hold a Gaussian disk per present joint; the following
    channels hold one anti-aliased segment per limb with both endpoints present.
    Joints outside the canvas are clipped by the canvas itself.
    """
    height, width = size
    if height <= 0 or width <= 0:
        raise ValueError(f"size must be positive, got {size}")

    canon = pose.to_canonical()
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    out = np.zeros((POSE_CHANNELS, height, width), dtype=np.float32)

    for j in range(NUM_JOINTS):
        if not canon.present[j]:
            continue
        x, y = canon.joints[j]
        d2 = (xx - x) ** 2 + (yy - y) ** 2
        out[j] = np.exp(-d2 / (2.0 * JOINT_SIGMA**2))

    half = LIMB_THICKNESS / 2.0
    for e, (a, b) in enumerate(EDGES):
        if not (canon.present[a] and canon.present[b]):
            continue
        dist = _segment_distance(xx, yy, canon.joints[a], canon.joints[b])
        out[NUM_JOINTS + e] = np.clip(half + 0.5 - dist, 0.0, 1.0)

    return out
