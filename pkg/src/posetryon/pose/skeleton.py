"""Skeleton layouts and the ``SkeletonPose`` container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from posetryon.errors import ShapeError
from posetryon.models import GarmentKind

JOINT_NAMES: tuple[str, ...] = (
    "neck",
    "r_shoulder",
    "l_shoulder",
    "r_elbow",
    "l_elbow",
    "r_wrist",
    "l_wrist",
    "r_hip",
    "l_hip",
    "r_knee",
    "l_knee",
    "r_ankle",
    "l_ankle",
)
NUM_JOINTS = len(JOINT_NAMES)
JOINT_INDEX = {name: i for i, name in enumerate(JOINT_NAMES)}

_EDGE_NAMES = (
    ("neck", "r_shoulder"),
    ("neck", "l_shoulder"),
    ("r_shoulder", "r_elbow"),
    ("r_elbow", "r_wrist"),
    ("l_shoulder", "l_elbow"),
    ("l_elbow", "l_wrist"),
    ("r_shoulder", "r_hip"),
    ("l_shoulder", "l_hip"),
    ("r_hip", "l_hip"),
    ("r_hip", "r_knee"),
    ("r_knee", "r_ankle"),
    ("l_hip", "l_knee"),
    ("l_knee", "l_ankle"),
)
EDGES: tuple[tuple[int, int], ...] = tuple((JOINT_INDEX[a], JOINT_INDEX[b]) for a, b in _EDGE_NAMES)

POSE_CHANNELS = NUM_JOINTS + len(EDGES)
"""Channels of a rasterized pose map: one per joint, one per limb."""


def _mirror(name: str) -> str:
    if name.startswith("r_"):
        return "l_" + name[2:]
    if name.startswith("l_"):
        return "r_" + name[2:]
    return name


FLIP_PERMUTATION: tuple[int, ...] = tuple(JOINT_INDEX[_mirror(n)] for n in JOINT_NAMES)

HUMAN_LAYOUT: tuple[int, ...] = tuple(range(NUM_JOINTS))

GARMENT_LAYOUTS: dict[GarmentKind, tuple[int, ...]] = {
    GarmentKind.UPPER: tuple(
        JOINT_INDEX[n]
        for n in (
            "neck", "r_shoulder", "l_shoulder", "r_elbow", "l_elbow",
            "r_wrist", "l_wrist", "r_hip", "l_hip",
        )
    ),
    GarmentKind.LOWER: tuple(
        JOINT_INDEX[n] for n in ("r_hip", "l_hip", "r_knee", "l_knee", "r_ankle", "l_ankle")
    ),
    GarmentKind.DRESS: tuple(
        JOINT_INDEX[n]
        for n in (
            "neck", "r_shoulder", "l_shoulder", "r_elbow", "l_elbow",
            "r_wrist", "l_wrist", "r_hip", "l_hip", "r_knee", "l_knee",
        )
    ),
}


@dataclass(frozen=True)
class SkeletonPose:
    """Keypoints of one frame.

    ``layout[i]`` is the canonical (human) joint index of keypoint ``i``, so
    garment landmarks and human joints share one index space.
    """

    joints: np.ndarray
    present: np.ndarray
    layout: tuple[int, ...] = HUMAN_LAYOUT

    def __post_init__(self) -> None:
        joints = np.asarray(self.joints, dtype=np.float64)
        present = np.asarray(self.present, dtype=np.uint8)
        if joints.shape != (len(self.layout), 2):
            raise ShapeError(f"joints must be [{len(self.layout)}, 2], got {list(joints.shape)}")
        if present.shape != (len(self.layout),):
            raise ShapeError(f"present must be [{len(self.layout)}], got {list(present.shape)}")
        if not np.all(np.isfinite(joints)):
            raise ValueError("joint coordinates must be finite")
        if np.any(present > 1):
            raise ValueError("present flags must be 0 or 1")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "present", present)

    @property
    def joint_count(self) -> int:
        return len(self.layout)

    @classmethod
    def empty(cls, layout: tuple[int, ...] = HUMAN_LAYOUT) -> "SkeletonPose":
        return cls(np.zeros((len(layout), 2)), np.zeros(len(layout), dtype=np.uint8), layout)

    def with_present(self, present: np.ndarray) -> "SkeletonPose":
        return SkeletonPose(self.joints.copy(), present, self.layout)

    def to_canonical(self) -> "SkeletonPose":
        """Scatter into the 13-joint layout; joints outside ``layout`` are absent."""
        joints = np.zeros((NUM_JOINTS, 2))
        present = np.zeros(NUM_JOINTS, dtype=np.uint8)
        idx = list(self.layout)
        joints[idx] = self.joints
        present[idx] = self.present
        return SkeletonPose(joints, present)

    def flipped(self, width: int) -> "SkeletonPose":
        """Mirror horizontally on a canvas of ``width`` pixels, swapping left/right joints."""
        position = {canon: i for i, canon in enumerate(self.layout)}
        source = [position[FLIP_PERMUTATION[canon]] for canon in self.layout]
        joints = self.joints[source].copy()
        joints[:, 0] = (width - 1) - joints[:, 0]
        return SkeletonPose(joints, self.present[source].copy(), self.layout)
