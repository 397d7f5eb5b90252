"""Attention module — hierarchical pose-aware attention and map capture."""

from posetryon.attention.blocks import (
    CrossAttention,
    HierarchicalAttentionBlock,
    PoseAwareSpatialAttention,
    PoseAwareTemporalAttention,
    TemporalShiftAttention,
    shift_keys,
)
from posetryon.attention.core import AttentionRecord, attend

__all__ = [
    "AttentionRecord",
    "CrossAttention",
    "HierarchicalAttentionBlock",
    "PoseAwareSpatialAttention",
    "PoseAwareTemporalAttention",
    "TemporalShiftAttention",
    "attend",
    "shift_keys",
]
