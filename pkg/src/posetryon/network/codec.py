"""Small convolutional latent codec (4x down/up, 4 latent channels)."""

from __future__ import annotations

import logging

import torch
import torch.nn.functional as F
from torch import nn

from posetryon.errors import MaskError, ShapeError
from posetryon.utils.config import LATENT_FACTOR

logger = logging.getLogger(__name__)

LATENT_CHANNELS = 4


class LatentCodec(nn.Module):
    """Encoder/decoder pair mapping ``[.., 3, H, W]`` frames to ``[.., 4, H/4, W/4]``.

    ``scale`` is measured after fitting so encoded latents have roughly unit
    standard deviation; ``encode`` applies it and ``decode`` removes it.
    """

    def __init__(self, width: int = 32) -> None:
        super().__init__()
        self.encoder = nn.Sequential(
            nn.Conv2d(3, width, 3, padding=1),
            nn.SiLU(),
            nn.Conv2d(width, width, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(width, 2 * width, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(2 * width, LATENT_CHANNELS, 1),
        )
        self.decoder = nn.Sequential(
            nn.Conv2d(LATENT_CHANNELS, 2 * width, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * width, width, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(width, width, 3, padding=1),
            nn.SiLU(),
            nn.Conv2d(width, 3, 3, padding=1),
        )
        self.register_buffer("scale", torch.ones(()))

    def encode(self, video: torch.Tensor) -> torch.Tensor:
        if video.shape[-3] != 3:
            raise ShapeError(f"expected 3 colour channels, got {video.shape[-3]}")
        h, w = video.shape[-2:]
        if h % LATENT_FACTOR or w % LATENT_FACTOR:
            raise ShapeError(f"frame size {h}x{w} not divisible by {LATENT_FACTOR}")
        lead = video.shape[:-3]
        z = self.encoder(video.reshape(-1, 3, h, w)) * self.scale
        return z.reshape(*lead, *z.shape[-3:])

    def decode(self, latents: torch.Tensor) -> torch.Tensor:
        if latents.shape[-3] != LATENT_CHANNELS:
            raise ShapeError(f"expected {LATENT_CHANNELS} latent channels, got {latents.shape[-3]}")
        lead = latents.shape[:-3]
        x = torch.sigmoid(self.decoder(latents.reshape(-1, *latents.shape[-3:]) / self.scale))
        return x.reshape(*lead, *x.shape[-3:])


def encode_latent(video: torch.Tensor, codec: LatentCodec) -> torch.Tensor:
    return codec.encode(video)


def decode_latent(latents: torch.Tensor, codec: LatentCodec) -> torch.Tensor:
    return codec.decode(latents)


def check_binary(mask: torch.Tensor, name: str = "mask") -> None:
    """Raise ``MaskError`` unless every value is exactly 0 or 1."""
    if bool(((mask != 0) & (mask != 1)).any()):
        raise MaskError(f"{name} must be binary (0/1)")


def mask_to_latent(mask: torch.Tensor) -> torch.Tensor:
    """Max-pool a pixel mask ``[.., 1, H, W]`` to latent resolution."""
    check_binary(mask)
    lead = mask.shape[:-3]
    pooled = F.max_pool2d(mask.reshape(-1, *mask.shape[-3:]), LATENT_FACTOR)
    return pooled.reshape(*lead, *pooled.shape[-3:])


def fit_codec(
    codec: LatentCodec,
    frames: torch.Tensor,
    *,
    iters: int,
    lr: float,
    batch_size: int,
    generator: torch.Generator,
) -> float:
    """Train the codec on ``frames [N, 3, H, W]`` with MSE, then fix its latent scale.

    Returns:
        Mean absolute reconstruction error over ``frames`` after training.
    """
    codec.requires_grad_(True)
    codec.train()
    optimizer = torch.optim.Adam(codec.parameters(), lr=lr)
    n = frames.shape[0]
    codec.scale.fill_(1.0)
    for it in range(iters):
        idx = torch.randint(0, n, (min(batch_size, n),), generator=generator)
        batch = frames[idx.to(frames.device)]
        recon = codec.decode(codec.encode(batch))
        loss = F.mse_loss(recon, batch)
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        if it % 100 == 0:
            logger.debug("codec iter %d mse %.5f", it, loss.item())

    codec.eval()
    codec.requires_grad_(False)
    with torch.no_grad():
        latents = torch.cat([codec.encode(chunk) for chunk in frames.split(64)])
        codec.scale.fill_(1.0 / max(float(latents.std()), 1e-6))
        mae = reconstruction_mae(codec, frames)
    logger.info(
        "Codec fitted: %d iters, latent scale %.4f, MAE %.4f", iters, float(codec.scale), mae
    )
    return mae


@torch.no_grad()
def reconstruction_mae(codec: LatentCodec, frames: torch.Tensor) -> float:
    """Per-pixel MAE of ``decode(encode(frames))``."""
    errors = [
        (codec.decode(codec.encode(chunk)) - chunk).abs().mean() * chunk.shape[0]
        for chunk in frames.split(64)
    ]
    return float(torch.stack(errors).sum() / frames.shape[0])
