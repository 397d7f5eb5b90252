"""Sliding-window planning and latent blending for long videos."""

from __future__ import annotations

import torch

from posetryon.errors import ConfigurationError, ShapeError


def plan_windows(length: int, window: int, stride: int) -> list[tuple[int, int]]:
    """Return ``[start, stop)`` windows covering ``length`` frames.

    A window longer than the video is clamped to it. When the stride does not
    land on the end, one extra window is right-aligned with the last frame.
    """
    if length < 1:
        raise ConfigurationError(f"video length must be >= 1, got {length}")
    if window < 1 or stride < 1:
        raise ConfigurationError(f"window and stride must be >= 1, got {window}, {stride}")
    if stride > window:
        raise ConfigurationError(
            f"stride {stride} exceeds window {window}; frames would be skipped"
        )
    window = min(window, length)
    starts = list(range(0, length - window + 1, stride))
    if starts[-1] + window < length:
        starts.append(length - window)
    return [(s, s + window) for s in starts]


def coverage_counts(windows: list[tuple[int, int]], length: int) -> list[int]:
    """How many windows contain each frame."""
    counts = [0] * length
    for start, stop in windows:
        for t in range(start, stop):
            counts[t] += 1
    return counts


def blend_windows(
    outputs: list[tuple[int, torch.Tensor]], length: int
) -> torch.Tensor:
    """Average per-window outputs ``[B, w, ...]`` into one ``[B, length, ...]`` tensor."""
    if not outputs:
        raise ShapeError("no window outputs to blend")
    first = outputs[0][1]
    total = first.new_zeros((first.shape[0], length, *first.shape[2:]))
    count = first.new_zeros(length)
    for start, chunk in outputs:
        stop = start + chunk.shape[1]
        if stop > length:
            raise ShapeError(f"window [{start}, {stop}) runs past {length} frames")
        total[:, start:stop] += chunk
        count[start:stop] += 1
    if bool((count == 0).any()):
        missing = (count == 0).nonzero().flatten().tolist()
        raise ShapeError(f"frames {missing} are covered by no window")
    return total / count.view(1, length, *([1] * (total.ndim - 2)))
