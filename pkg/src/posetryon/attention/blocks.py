"""Pose-aware spatial, temporal-shift, cross and pose-aware temporal attention.

All sub-blocks return the attention branch only; :class:`HierarchicalAttentionBlock`
adds the residual connections.
"""

from __future__ import annotations

import torch
from einops import rearrange, repeat
from torch import nn

from posetryon.attention.core import attend
from posetryon.errors import ConfigurationError, ShapeError
from posetryon.models import Phase
from posetryon.pose.encoder import PoseAdapter


def _per_item(x: torch.Tensor, n: int) -> torch.Tensor:
    """Broadcast a frame-shared ``[S, d]`` tensor to ``[n, S, d]``."""
    return x.unsqueeze(0).expand(n, *x.shape) if x.ndim == 2 else x


def _check(name: str, actual: torch.Size, expected: tuple[int, ...]) -> None:
    if tuple(actual) != tuple(expected):
        raise ShapeError(f"{name}: expected {list(expected)}, got {list(actual)}")


class PoseAwareSpatialAttention(nn.Module):
    """Self-attention over ``[f_h, f_g]`` with adapted poses added to q, k and v."""

    def __init__(
        self,
        dim: int,
        heads: int,
        pose_dim: int,
        adapter_ratio: int = 4,
        *,
        use_pose_adapter: bool = True,
    ) -> None:
        super().__init__()
        self.heads = heads
        self.to_q = nn.Linear(dim, dim, bias=False)
        self.to_k = nn.Linear(dim, dim, bias=False)
        self.to_v = nn.Linear(dim, dim, bias=False)
        self.to_out = nn.Linear(dim, dim)
        self.adapter = PoseAdapter(pose_dim, dim, adapter_ratio) if use_pose_adapter else None

    def forward(
        self,
        f_h: torch.Tensor,
        f_g: torch.Tensor,
        p_h: torch.Tensor | None = None,
        p_g: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Attend over frames ``f_h [N, S_h, d]`` joined with garment tokens.

        Returns:
            ``(out [N, S_h, d], probs [N, S_h, S_h + S_g])`` with probabilities
            averaged over heads.
        """
        n, s_h, d = f_h.shape
        f_g = _per_item(f_g, n)
        if f_g.shape[0] != n or f_g.shape[-1] != d:
            raise ShapeError(f"garment tokens {list(f_g.shape)} do not match {list(f_h.shape)}")
        f = torch.cat([f_h, f_g], dim=1)
        if self.adapter is not None and p_h is not None and p_g is not None:
            p_g = _per_item(p_g, n)
            _check("human pose tokens", p_h.shape[:-1], (n, s_h))
            _check("garment pose tokens", p_g.shape[:-1], tuple(f_g.shape[:-1]))
            f = f + self.adapter(torch.cat([p_h, p_g], dim=1))
        out, probs = attend(self.to_q(f[:, :s_h]), self.to_k(f), self.to_v(f), self.heads)
        return self.to_out(out), probs.mean(dim=1)


def shift_keys(h: torch.Tensor, shift: int) -> torch.Tensor:
    """Keys for temporal-shift attention.

    Frame ``t`` gets its own tokens followed by the tokens of frames
    ``t-1 .. t-shift``; indices below zero repeat frame 0.

    Args:
        h: ``[B, T, S, d]``.

    Returns:
        ``[B, T, S * (1 + shift), d]``.
    """
    if shift < 0:
        raise ConfigurationError(f"shift must be >= 0, got {shift}")
    frames = torch.arange(h.shape[1], device=h.device)
    parts = [h] + [h[:, (frames - lag).clamp(min=0)] for lag in range(1, shift + 1)]
    return torch.cat(parts, dim=2)


class TemporalShiftAttention(nn.Module):
    """Per-frame attention whose keys also cover the previous ``shift`` frames."""

    def __init__(self, dim: int, heads: int, shift: int = 1, *, zero_init: bool = True) -> None:
        super().__init__()
        if shift < 0:
            raise ConfigurationError(f"shift must be >= 0, got {shift}")
        self.heads = heads
        self.shift = shift
        self.to_q = nn.Linear(dim, dim, bias=False)
        self.to_k = nn.Linear(dim, dim, bias=False)
        self.to_v = nn.Linear(dim, dim, bias=False)
        self.to_out = nn.Linear(dim, dim)
        if zero_init:
            nn.init.zeros_(self.to_out.weight)
            nn.init.zeros_(self.to_out.bias)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        b, t = h.shape[:2]
        kv = rearrange(shift_keys(h, self.shift), "b t s d -> (b t) s d")
        q = rearrange(h, "b t s d -> (b t) s d")
        out, _ = attend(self.to_q(q), self.to_k(kv), self.to_v(kv), self.heads)
        return rearrange(self.to_out(out), "(b t) s d -> b t s d", b=b, t=t)


class CrossAttention(nn.Module):
    """Queries from frame tokens, keys/values from garment embedding tokens."""

    def __init__(self, dim: int, context_dim: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.to_q = nn.Linear(dim, dim, bias=False)
        self.to_k = nn.Linear(context_dim, dim, bias=False)
        self.to_v = nn.Linear(context_dim, dim, bias=False)
        self.to_out = nn.Linear(dim, dim)
        self.context_dim = context_dim

    def forward(self, h: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        context = _per_item(context, h.shape[0])
        if context.shape[-1] != self.context_dim or context.shape[0] != h.shape[0]:
            raise ShapeError(f"context {list(context.shape)} does not fit tokens {list(h.shape)}")
        out, _ = attend(self.to_q(h), self.to_k(context), self.to_v(context), self.heads)
        return self.to_out(out)


class PoseAwareTemporalAttention(nn.Module):
    """Attention across frames at each spatial location after adding adapted pose."""

    def __init__(
        self,
        dim: int,
        heads: int,
        pose_dim: int,
        adapter_ratio: int = 4,
        *,
        use_pose_adapter: bool = True,
        zero_init: bool = True,
    ) -> None:
        super().__init__()
        self.heads = heads
        self.to_q = nn.Linear(dim, dim, bias=False)
        self.to_k = nn.Linear(dim, dim, bias=False)
        self.to_v = nn.Linear(dim, dim, bias=False)
        self.to_out = nn.Linear(dim, dim)
        self.adapter = PoseAdapter(pose_dim, dim, adapter_ratio) if use_pose_adapter else None
        if zero_init:
            nn.init.zeros_(self.to_out.weight)
            nn.init.zeros_(self.to_out.bias)

    def forward(self, h: torch.Tensor, p_h: torch.Tensor | None = None) -> torch.Tensor:
        b, t, s, _ = h.shape
        if self.adapter is not None and p_h is not None:
            _check("human pose tokens", p_h.shape[:-1], (b, t, s))
            h = h + self.adapter(p_h)
        x = rearrange(h, "b t s d -> (b s) t d")
        out, _ = attend(self.to_q(x), self.to_k(x), self.to_v(x), self.heads)
        return rearrange(self.to_out(out), "(b s) t d -> b t s d", b=b, s=s)


class HierarchicalAttentionBlock(nn.Module):
    """PASA, TSA, cross-attention and PATA in sequence, each wrapped in a residual.

    Image mode runs PASA and cross-attention only.
    """

    def __init__(
        self,
        dim: int,
        context_dim: int,
        pose_dim: int,
        heads: int = 4,
        *,
        shift: int = 1,
        adapter_ratio: int = 4,
        use_pose_adapters: bool = True,
        use_temporal_shift: bool = True,
    ) -> None:
        super().__init__()
        self.pasa_norm = nn.LayerNorm(dim)
        self.pasa = PoseAwareSpatialAttention(
            dim, heads, pose_dim, adapter_ratio, use_pose_adapter=use_pose_adapters
        )
        self.tsa_norm = nn.LayerNorm(dim) if use_temporal_shift else None
        self.tsa = TemporalShiftAttention(dim, heads, shift) if use_temporal_shift else None
        self.cross_attn_norm = nn.LayerNorm(dim)
        self.cross_attn = CrossAttention(dim, context_dim, heads)
        self.pata_norm = nn.LayerNorm(dim)
        self.pata = PoseAwareTemporalAttention(
            dim, heads, pose_dim, adapter_ratio, use_pose_adapter=use_pose_adapters
        )

    def forward(
        self,
        f_h: torch.Tensor,
        f_g: torch.Tensor,
        p_h: torch.Tensor | None,
        p_g: torch.Tensor | None,
        c_g: torch.Tensor,
        mode: Phase | str = Phase.VIDEO,
        garment_keep: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Run the block on a clip batch.

        Args:
            f_h: Frame tokens ``[B, T, S_h, d]``.
            f_g: Garment U-Net tokens ``[B, S_g, d]``, shared by all frames.
            p_h: Human pose tokens ``[B, T, S_h, d_p]``.
            p_g: Garment pose tokens ``[B, S_g, d_p]``.
            c_g: Garment embedding ``[B, S_c, d_c]``.
            mode: ``image`` skips TSA and PATA and requires ``T == 1``.
            garment_keep: ``[B]`` multiplier on garment tokens; 0 drops them.

        Returns:
            ``(tokens [B, T, S_h, d], probs [B, T, S_h, S_h + S_g])``.
        """
        mode = Phase(mode)
        b, t, s_h, _ = f_h.shape
        if mode is Phase.IMAGE and t != 1:
            raise ConfigurationError(f"image mode needs a single frame, got T={t}")

        g = self.pasa_norm(f_g)
        if garment_keep is not None:
            g = g * garment_keep.to(g.dtype).view(b, 1, 1)
        x = rearrange(f_h, "b t s d -> (b t) s d")
        g = repeat(g, "b s d -> (b t) s d", t=t)
        ph = rearrange(p_h, "b t s d -> (b t) s d") if p_h is not None else None
        pg = repeat(p_g, "b s d -> (b t) s d", t=t) if p_g is not None else None

        attn, probs = self.pasa(self.pasa_norm(x), g, ph, pg)
        x = rearrange(x + attn, "(b t) s d -> b t s d", b=b)

        if mode is Phase.VIDEO and self.tsa is not None:
            x = x + self.tsa(self.tsa_norm(x))

        context = repeat(c_g, "b s d -> (b t) s d", t=t)
        flat = rearrange(x, "b t s d -> (b t) s d")
        x = rearrange(
            flat + self.cross_attn(self.cross_attn_norm(flat), context), "(b t) s d -> b t s d", b=b
        )

        if mode is Phase.VIDEO:
            x = x + self.pata(self.pata_norm(x), p_h)

        return x, rearrange(probs, "(b t) q k -> b t q k", b=b)
