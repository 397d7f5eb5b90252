"""U-Net building blocks and the two branches of the try-on denoiser."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import nn

from posetryon.attention.blocks import HierarchicalAttentionBlock
from posetryon.attention.core import attend
from posetryon.models import Phase

MAIN_IN_CHANNELS = 4 + 4 + 1
"""Noisy latent, agnostic latent and mask, concatenated on channels."""


def _groups(channels: int) -> int:
    for g in (8, 4, 2, 1):
        if channels % g == 0:
            return g
    return 1


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps ``[N] -> [N, dim]``."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=torch.float32, device=t.device) / half
    )
    args = t.float()[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class TimeEmbedding(nn.Module):
    def __init__(self, base: int, dim: int) -> None:
        super().__init__()
        self.base = base
        self.mlp = nn.Sequential(nn.Linear(base, dim), nn.SiLU(), nn.Linear(dim, dim))

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.mlp(timestep_embedding(t, self.base).to(self.mlp[0].weight.dtype))


class ResBlock(nn.Module):
    """GroupNorm/SiLU/conv twice with a timestep shift in between."""

    def __init__(self, in_ch: int, out_ch: int, time_dim: int) -> None:
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(_groups(out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class Downsample(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class SpatialSelfAttention(nn.Module):
    """Pre-norm residual self-attention over the tokens of a feature map."""

    def __init__(self, dim: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.norm = nn.LayerNorm(dim)
        self.to_qkv = nn.Linear(dim, 3 * dim, bias=False)
        self.to_out = nn.Linear(dim, dim)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        q, k, v = self.to_qkv(self.norm(tokens)).chunk(3, dim=-1)
        out, _ = attend(q, k, v, self.heads)
        return tokens + self.to_out(out)


def attention_keys(num_stages: int, attention_stages: list[int]) -> list[str]:
    """Attention block keys in forward order: encoder stages, then decoder stages."""
    stages = [s for s in sorted(set(attention_stages)) if 0 <= s < num_stages]
    return [f"down.{s}" for s in stages] + [f"up.{s}" for s in reversed(stages)]


class MainUNet(nn.Module):
    """Denoising U-Net on the 9-channel input with hierarchical attention blocks."""

    def __init__(
        self,
        widths: list[int],
        attention_stages: list[int],
        *,
        context_dim: int,
        pose_dim: int,
        heads: int,
        shift: int,
        adapter_ratio: int,
        use_pose_adapters: bool = True,
        use_temporal_shift: bool = True,
    ) -> None:
        super().__init__()
        self.widths = list(widths)
        self.attention_stages = sorted(set(attention_stages))
        n = len(widths)
        time_dim = 4 * widths[0]
        self.time_embed = TimeEmbedding(widths[0], time_dim)
        self.in_conv = nn.Conv2d(MAIN_IN_CHANNELS, widths[0], 3, padding=1)

        def block(width: int) -> HierarchicalAttentionBlock:
            return HierarchicalAttentionBlock(
                width,
                context_dim,
                pose_dim,
                heads,
                shift=shift,
                adapter_ratio=adapter_ratio,
                use_pose_adapters=use_pose_adapters,
                use_temporal_shift=use_temporal_shift,
            )

        prev = widths[0]
        self.down_res = nn.ModuleList()
        self.down_attn = nn.ModuleDict()
        self.downsamples = nn.ModuleList()
        for i, w in enumerate(widths):
            self.down_res.append(ResBlock(prev, w, time_dim))
            if i in self.attention_stages:
                self.down_attn[str(i)] = block(w)
            if i < n - 1:
                self.downsamples.append(Downsample(w))
            prev = w

        self.mid = ResBlock(prev, prev, time_dim)

        self.up_res = nn.ModuleDict()
        self.up_attn = nn.ModuleDict()
        self.upsamples = nn.ModuleDict()
        for i in reversed(range(n)):
            w = widths[i]
            self.up_res[str(i)] = ResBlock(prev + w, w, time_dim)
            if i in self.attention_stages:
                self.up_attn[str(i)] = block(w)
            if i > 0:
                self.upsamples[str(i)] = Upsample(w)
            prev = w

        self.out_norm = nn.GroupNorm(_groups(widths[0]), widths[0])
        self.out_conv = nn.Conv2d(widths[0], 4, 3, padding=1)

    @property
    def keys(self) -> list[str]:
        return attention_keys(len(self.widths), self.attention_stages)

    @property
    def decoder_keys(self) -> list[str]:
        return [k for k in self.keys if k.startswith("up.")]

    def _apply_block(
        self,
        blk: HierarchicalAttentionBlock,
        x: torch.Tensor,
        frames: int,
        ctx: dict,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        hh, ww = x.shape[-2:]
        tokens = rearrange(x, "(b t) c h w -> b t (h w) c", t=frames)
        p_h = F.adaptive_avg_pool2d(ctx["pose_h"], (hh, ww))
        p_g = F.adaptive_avg_pool2d(ctx["pose_g"], (hh, ww))
        out, probs = blk(
            tokens,
            ctx["garment"][ctx["key"]],
            rearrange(p_h, "(b t) c h w -> b t (h w) c", t=frames),
            rearrange(p_g, "b c h w -> b (h w) c"),
            ctx["c_g"],
            ctx["mode"],
            ctx["keep"],
        )
        return rearrange(out, "b t (h w) c -> (b t) c h w", h=hh), probs

    def forward(
        self,
        x: torch.Tensor,
        timesteps: torch.Tensor,
        frames: int,
        *,
        garment_features: dict[str, torch.Tensor],
        pose_h: torch.Tensor,
        pose_g: torch.Tensor,
        c_g: torch.Tensor,
        mode: Phase,
        garment_keep: torch.Tensor | None,
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        """Predict noise for ``x [B*T, 9, h, w]``.

        Returns:
            ``(eps [B*T, 4, h, w], probs)`` where ``probs`` maps every attention
            key to its ``[B, T, S_h, S_h + S_g]`` map.
        """
        temb = self.time_embed(timesteps.repeat_interleave(frames))
        ctx = {
            "garment": garment_features,
            "pose_h": pose_h,
            "pose_g": pose_g,
            "c_g": c_g,
            "mode": mode,
            "keep": garment_keep,
        }
        probs: dict[str, torch.Tensor] = {}

        h = self.in_conv(x)
        skips: list[torch.Tensor] = []
        for i, res in enumerate(self.down_res):
            h = res(h, temb)
            if str(i) in self.down_attn:
                ctx["key"] = f"down.{i}"
                h, probs[ctx["key"]] = self._apply_block(self.down_attn[str(i)], h, frames, ctx)
            skips.append(h)
            if i < len(self.downsamples):
                h = self.downsamples[i](h)

        h = self.mid(h, temb)

        for i in reversed(range(len(self.widths))):
            h = self.up_res[str(i)](torch.cat([h, skips[i]], dim=1), temb)
            if str(i) in self.up_attn:
                ctx["key"] = f"up.{i}"
                h, probs[ctx["key"]] = self._apply_block(self.up_attn[str(i)], h, frames, ctx)
            if str(i) in self.upsamples:
                h = self.upsamples[str(i)](h)

        return self.out_conv(F.silu(self.out_norm(h))), probs


class GarmentUNet(nn.Module):
    """Garment branch on the clean garment latent.

    Collects the tokens entering each self-attention layer; layers after the
    last attention stage of the decoder are never built.
    """

    def __init__(self, widths: list[int], attention_stages: list[int], *, heads: int) -> None:
        super().__init__()
        self.widths = list(widths)
        self.attention_stages = sorted(set(attention_stages))
        n = len(widths)
        last = self.attention_stages[0] if self.attention_stages else n - 1
        time_dim = 4 * widths[0]
        self.time_embed = TimeEmbedding(widths[0], time_dim)
        self.in_conv = nn.Conv2d(4, widths[0], 3, padding=1)

        prev = widths[0]
        self.down_res = nn.ModuleList()
        self.down_attn = nn.ModuleDict()
        self.downsamples = nn.ModuleList()
        for i, w in enumerate(widths):
            self.down_res.append(ResBlock(prev, w, time_dim))
            if i in self.attention_stages:
                self.down_attn[str(i)] = SpatialSelfAttention(w, heads)
            if i < n - 1:
                self.downsamples.append(Downsample(w))
            prev = w

        self.mid = ResBlock(prev, prev, time_dim)

        self.up_res = nn.ModuleDict()
        self.up_attn = nn.ModuleDict()
        self.upsamples = nn.ModuleDict()
        for i in range(n - 1, last - 1, -1):
            w = widths[i]
            self.up_res[str(i)] = ResBlock(prev + w, w, time_dim)
            if i in self.attention_stages and i != last:
                self.up_attn[str(i)] = SpatialSelfAttention(w, heads)
            if i > last:
                self.upsamples[str(i)] = Upsample(w)
            prev = w
        self.last_stage = last

    @property
    def keys(self) -> list[str]:
        return attention_keys(len(self.widths), self.attention_stages)

    def forward(self, latent: torch.Tensor, timesteps: torch.Tensor) -> dict[str, torch.Tensor]:
        """Return ``{key: tokens [B, S, w]}`` for every attention stage."""
        temb = self.time_embed(timesteps)
        feats: dict[str, torch.Tensor] = {}

        def collect(key: str, h: torch.Tensor, attn: nn.Module | None) -> torch.Tensor:
            tokens = rearrange(h, "b c h w -> b (h w) c")
            feats[key] = tokens
            if attn is None:
                return h
            return rearrange(attn(tokens), "b (h w) c -> b c h w", h=h.shape[-2])

        h = self.in_conv(latent)
        skips: list[torch.Tensor] = []
        for i, res in enumerate(self.down_res):
            h = res(h, temb)
            if str(i) in self.down_attn:
                h = collect(f"down.{i}", h, self.down_attn[str(i)])
            skips.append(h)
            if i < len(self.downsamples):
                h = self.downsamples[i](h)

        h = self.mid(h, temb)

        for i in range(len(self.widths) - 1, self.last_stage - 1, -1):
            h = self.up_res[str(i)](torch.cat([h, skips[i]], dim=1), temb)
            if i in self.attention_stages:
                h = collect(f"up.{i}", h, self.up_attn[str(i)] if str(i) in self.up_attn else None)
            if str(i) in self.upsamples:
                h = self.upsamples[str(i)](h)
        return feats
