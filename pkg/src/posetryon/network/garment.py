"""Garment image embedding used by cross-attention, with a learned null token set."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import nn

from posetryon.errors import ShapeError


class GarmentEncoder(nn.Module):
    """Two strided convs, adaptive pooling to a ``grid x grid`` token set, then a projection."""

    def __init__(self, context_dim: int, grid: int = 2, width: int = 32) -> None:
        super().__init__()
        self.grid = grid
        self.conv1 = nn.Conv2d(3, width // 2, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(width // 2, width, 3, stride=2, padding=1)
        self.proj = nn.Linear(width, context_dim)
        self.null_embedding = nn.Parameter(torch.randn(grid * grid, context_dim) * 0.02)

    def forward(self, garment: torch.Tensor) -> torch.Tensor:
        """``[B, 3, H, W] -> [B, S_c, d_c]``."""
        if garment.ndim != 4 or garment.shape[1] != 3:
            raise ShapeError(f"garment image must be [B, 3, H, W], got {list(garment.shape)}")
        x = F.silu(self.conv1(garment))
        x = F.silu(self.conv2(x))
        x = F.adaptive_avg_pool2d(x, (self.grid, self.grid))
        return self.proj(rearrange(x, "b c h w -> b (h w) c"))

    def null(self, batch: int) -> torch.Tensor:
        return self.null_embedding.unsqueeze(0).expand(batch, -1, -1)


def embed_garment(garment_image: torch.Tensor, encoder: GarmentEncoder) -> torch.Tensor:
    """Embed a single ``[3, H, W]`` garment image into ``[S_c, d_c]`` tokens."""
    if garment_image.ndim != 3 or garment_image.shape[0] != 3:
        raise ShapeError(f"garment image must be [3, H, W], got {list(garment_image.shape)}")
    return encoder(garment_image.unsqueeze(0))[0]
