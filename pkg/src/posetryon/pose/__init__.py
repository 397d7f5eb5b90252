"""Pose module — skeletons, rasterization, encoder and adapters."""

from posetryon.pose.dropout import drop_keypoints
from posetryon.pose.encoder import PoseAdapter, PoseEncoder, adapt, encode_pose
from posetryon.pose.raster import rasterize
from posetryon.pose.skeleton import (
    EDGES,
    GARMENT_LAYOUTS,
    HUMAN_LAYOUT,
    JOINT_NAMES,
    NUM_JOINTS,
    POSE_CHANNELS,
    SkeletonPose,
)

__all__ = [
    "EDGES",
    "GARMENT_LAYOUTS",
    "HUMAN_LAYOUT",
    "JOINT_NAMES",
    "NUM_JOINTS",
    "POSE_CHANNELS",
    "PoseAdapter",
    "PoseEncoder",
    "SkeletonPose",
    "adapt",
    "drop_keypoints",
    "encode_pose",
    "rasterize",
]
