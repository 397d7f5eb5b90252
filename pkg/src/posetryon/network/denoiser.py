"""Dual-branch try-on denoiser."""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import torch
from torch import nn

from posetryon.attention.core import AttentionRecord
from posetryon.errors import ConfigurationError, ShapeError
from posetryon.models import Phase
from posetryon.network.codec import LatentCodec, check_binary
from posetryon.network.garment import GarmentEncoder
from posetryon.network.unet import GarmentUNet, MainUNet
from posetryon.pose.encoder import PoseEncoder
from posetryon.utils.config import ModelSettings

logger = logging.getLogger(__name__)


@dataclass
class DenoiseConditions:
    """Everything except the noisy latent that one denoising call consumes.

    Shapes: ``agnostic_latent [B, T, 4, h, w]``, ``mask [B, T, 1, h, w]`` (binary,
    latent resolution), ``human_pose_maps [B, T, C_p, H, W]``,
    ``garment_pose_map [B, C_p, H, W]``, ``garment_latent [B, 4, h, w]``,
    ``garment_image [B, 3, H, W]``.
    """

    agnostic_latent: torch.Tensor
    mask: torch.Tensor
    human_pose_maps: torch.Tensor
    garment_pose_map: torch.Tensor
    garment_latent: torch.Tensor
    garment_image: torch.Tensor

    def to(self, device: torch.device | str) -> "DenoiseConditions":
        return DenoiseConditions(**{f.name: getattr(self, f.name).to(device) for f in fields(self)})

    def frames(self, start: int, stop: int) -> "DenoiseConditions":
        """Restrict the per-frame tensors to ``[start, stop)``."""
        return DenoiseConditions(
            agnostic_latent=self.agnostic_latent[:, start:stop],
            mask=self.mask[:, start:stop],
            human_pose_maps=self.human_pose_maps[:, start:stop],
            garment_pose_map=self.garment_pose_map,
            garment_latent=self.garment_latent,
            garment_image=self.garment_image,
        )


class TryOnDenoiser(nn.Module):
    """Main U-Net, garment U-Net, pose encoder, garment encoder and frozen codec."""

    def __init__(self, cfg: ModelSettings) -> None:
        super().__init__()
        garment_widths = cfg.garment_widths or cfg.widths
        for stage in cfg.attention_stages:
            if stage >= len(garment_widths) or garment_widths[stage] != cfg.widths[stage]:
                got = garment_widths[stage] if stage < len(garment_widths) else None
                raise ConfigurationError(
                    f"garment U-Net stage {stage} has width {got}, "
                    f"main U-Net expects {cfg.widths[stage]}"
                )
        if len(cfg.attention_stages) < cfg.tra_layers:
            raise ConfigurationError(
                f"{cfg.tra_layers} TRA layers requested but the decoder has only "
                f"{len(cfg.attention_stages)} attention blocks"
            )

        self.cfg = cfg
        self.pose_encoder = PoseEncoder(cfg.pose_dim, cfg.pose_encoder_widths)
        self.garment_encoder = GarmentEncoder(cfg.context_dim, cfg.context_grid)
        self.main_unet = MainUNet(
            cfg.widths,
            cfg.attention_stages,
            context_dim=cfg.context_dim,
            pose_dim=cfg.pose_dim,
            heads=cfg.heads,
            shift=cfg.shift_frames,
            adapter_ratio=cfg.adapter_ratio,
            use_pose_adapters=cfg.use_pose_adapters,
            use_temporal_shift=cfg.use_temporal_shift,
        )
        self.garment_unet = GarmentUNet(garment_widths, cfg.attention_stages, heads=cfg.heads)
        self.codec = LatentCodec(cfg.codec_width)
        self.codec.requires_grad_(False)
        self.tra_keys = self.main_unet.decoder_keys[-cfg.tra_layers:]
        logger.debug(
            "Built denoiser: %d trainable parameters, TRA layers %s",
            sum(p.numel() for _, p in self.trainable_parameters()),
            self.tra_keys,
        )

    def trainable_parameters(self) -> list[tuple[str, nn.Parameter]]:
        """Named parameters outside the frozen codec."""
        return [(n, p) for n, p in self.named_parameters() if not n.startswith("codec.")]

    def forward(
        self,
        z_t: torch.Tensor,
        timesteps: torch.Tensor,
        cond: DenoiseConditions,
        mode: Phase | str = Phase.VIDEO,
        garment_keep: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, list[AttentionRecord]]:
        """Predict the noise in ``z_t [B, T, 4, h, w]``.

        Args:
            timesteps: ``[B]`` integer timesteps shared by the frames of a clip.
            garment_keep: ``[B]`` 1 for conditional, 0 for the unconditional branch
                (null garment embedding, zeroed garment-branch features).

        Returns:
            ``(eps [B, T, 4, h, w], records)`` with one record per TRA layer.
        """
        mode = Phase(mode)
        b, t = z_t.shape[:2]
        if cond.agnostic_latent.shape != z_t.shape:
            raise ShapeError(
                f"agnostic latent {list(cond.agnostic_latent.shape)} != z_t {list(z_t.shape)}"
            )
        if cond.mask.shape != (b, t, 1, *z_t.shape[-2:]):
            raise ShapeError(f"mask {list(cond.mask.shape)} does not match z_t {list(z_t.shape)}")
        check_binary(cond.mask, "agnostic mask")

        garment_features = self.garment_unet(cond.garment_latent, timesteps)
        pose_h = self.pose_encoder(cond.human_pose_maps.flatten(0, 1))
        pose_g = self.pose_encoder(cond.garment_pose_map)
        if pose_h.shape[-2:] != z_t.shape[-2:]:
            raise ShapeError(
                f"pose embedding {list(pose_h.shape[-2:])} != latent {list(z_t.shape[-2:])}"
            )

        c_g = self.garment_encoder(cond.garment_image)
        if garment_keep is not None:
            keep = garment_keep.to(c_g.dtype).view(b, 1, 1)
            c_g = keep * c_g + (1.0 - keep) * self.garment_encoder.null(b)

        x = torch.cat([z_t, cond.agnostic_latent, cond.mask.to(z_t.dtype)], dim=2)
        eps, probs = self.main_unet(
            x.flatten(0, 1),
            timesteps,
            t,
            garment_features=garment_features,
            pose_h=pose_h,
            pose_g=pose_g,
            c_g=c_g,
            mode=mode,
            garment_keep=garment_keep,
        )
        records = [AttentionRecord(key, probs[key]) for key in self.tra_keys]
        return eps.reshape(b, t, *eps.shape[1:]), records
