"""Pose encoder and the zero-initialized pose adapter."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from posetryon.errors import ShapeError
from posetryon.pose.skeleton import POSE_CHANNELS

ENCODER_STRIDE = 4
_STRIDES = (2, 1, 2, 1)


class PoseEncoder(nn.Module):
    """Four 3x3 convolutions taking a pose map down to latent resolution."""

    def __init__(
        self,
        out_dim: int,
        widths: tuple[int, ...] | list[int] = (16, 32, 64),
        in_channels: int = POSE_CHANNELS,
        *,
        bias: bool = True,
    ) -> None:
        super().__init__()
        chans = [in_channels, *widths, out_dim]
        self.convs = nn.ModuleList(
            nn.Conv2d(chans[i], chans[i + 1], 3, stride=_STRIDES[i], padding=1, bias=bias)
            for i in range(4)
        )
        self.in_channels = in_channels
        self.out_dim = out_dim

    def forward(self, maps: torch.Tensor) -> torch.Tensor:
        if maps.shape[-3] != self.in_channels:
            raise ShapeError(f"expected {self.in_channels} pose channels, got {maps.shape[-3]}")
        h, w = maps.shape[-2:]
        if h % ENCODER_STRIDE or w % ENCODER_STRIDE:
            raise ShapeError(f"pose map {h}x{w} not divisible by {ENCODER_STRIDE}")
        lead = maps.shape[:-3]
        x = maps.reshape(-1, *maps.shape[-3:])
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = F.silu(x)
        return x.reshape(*lead, *x.shape[-3:])


def encode_pose(pose_map: torch.Tensor, encoder: PoseEncoder) -> torch.Tensor:
    """Embed a ``[C_p, H, W]`` (or batched) pose map into ``[d_p, H/4, W/4]``."""
    return encoder(pose_map)


class PoseAdapter(nn.Module):
    """Bottleneck ``up(GELU(down(p)))`` whose up projection starts at zero."""

    def __init__(self, in_dim: int, dim: int, ratio: int = 4) -> None:
        super().__init__()
        hidden = max(1, dim // ratio)
        self.down = nn.Linear(in_dim, hidden)
        self.up = nn.Linear(hidden, dim)
        nn.init.zeros_(self.up.weight)
        nn.init.zeros_(self.up.bias)
        self.in_dim = in_dim
        self.dim = dim

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.shape[-1] != self.in_dim:
            raise ShapeError(
                f"pose tokens have dim {tokens.shape[-1]}, adapter expects {self.in_dim}"
            )
        return self.up(F.gelu(self.down(tokens)))


def adapt(tokens: torch.Tensor, adapter: PoseAdapter) -> torch.Tensor:
    """Apply ``adapter`` token-wise."""
    return adapter(tokens)
