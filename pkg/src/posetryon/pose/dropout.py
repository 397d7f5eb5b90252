"""Training-time keypoint dropping."""

from __future__ import annotations

import numpy as np

from posetryon.errors import ConfigurationError
from posetryon.pose.skeleton import SkeletonPose


def drop_keypoints(
    pose: SkeletonPose, p_drop: float, rng_seed: int | np.random.Generator
) -> SkeletonPose:
    """Independently mark each present joint absent with probability ``p_drop``."""
    if not 0.0 <= p_drop <= 1.0:
        raise ConfigurationError(f"p_drop must lie in [0, 1], got {p_drop}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    dropped = rng.random(pose.joint_count) < p_drop
    present = np.where(dropped, 0, pose.present).astype(np.uint8)
    return pose.with_present(present)
