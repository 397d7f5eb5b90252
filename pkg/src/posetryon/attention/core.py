"""Multi-head scaled dot-product attention that also returns its probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from einops import rearrange

from posetryon.errors import ShapeError


def attend(
    q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, heads: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Attention over ``[N, S, d]`` inputs.

    Returns:
        ``(out [N, S_q, d], probs [N, heads, S_q, S_k])``.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[:-1] != v.shape[:-1]:
        raise ShapeError(f"q/k/v mismatch: {list(q.shape)}, {list(k.shape)}, {list(v.shape)}")
    if q.shape[-1] % heads:
        raise ShapeError(f"dim {q.shape[-1]} not divisible by {heads} heads")
    qh, kh, vh = (rearrange(x, "n s (h c) -> n h s c", h=heads) for x in (q, k, v))
    scale = qh.shape[-1] ** -0.5
    probs = torch.softmax(torch.einsum("nhqc,nhkc->nhqk", qh, kh) * scale, dim=-1)
    out = torch.einsum("nhqk,nhkc->nhqc", probs, vh)
    return rearrange(out, "n h s c -> n s (h c)"), probs


@dataclass
class AttentionRecord:
    """Head-averaged PASA probabilities of one layer, main-branch query rows only.

    ``probs`` has shape ``[B, T, S_h, S_h + S_g]``.
    """

    layer_id: str
    probs: torch.Tensor

    @property
    def num_frames(self) -> int:
        return int(self.probs.shape[1])
