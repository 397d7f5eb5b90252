"""Noise-prediction loss, temporal attention regularizer and their sum."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from posetryon.attention.core import AttentionRecord
from posetryon.errors import ConfigurationError, ShapeError


@dataclass
class LossConfig:
    """Weights of the total loss.

    ``gammas`` overrides ``gamma`` per TRA layer when given.
    """

    lam: float = 1e-3
    gamma: float = 0.5
    tra_layers: int = 2
    gammas: list[float] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.gammas is not None and len(self.gammas) != self.tra_layers:
            raise ConfigurationError(
                f"{len(self.gammas)} gammas given for {self.tra_layers} TRA layers"
            )

    def layer_weight(self, i: int) -> float:
        return self.gammas[i] if self.gammas is not None else self.gamma


def ldm_loss(eps_pred: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all elements."""
    return F.mse_loss(eps_pred, eps)


def tra_loss(records: list[AttentionRecord], cfg: LossConfig) -> torch.Tensor:
    """Weighted sum over layers of the summed frame-to-frame mean absolute map change.

    Each record holds ``[B, T, S_h, S_k]``; the per-pair mean is taken over
    batch and map entries. Single-frame records contribute zero.
    """
    total: torch.Tensor | None = None
    for i, record in enumerate(records):
        probs = record.probs
        if probs.ndim != 4:
            raise ShapeError(
                f"record {record.layer_id!r} must be [B, T, S_h, S_k], got {list(probs.shape)}"
            )
        if probs.shape[1] < 2:
            term = probs.new_zeros(())
        else:
            diffs = (probs[:, 1:] - probs[:, :-1]).abs().mean(dim=(0, 2, 3))
            term = cfg.layer_weight(i) * diffs.sum()
        total = term if total is None else total + term
    return total if total is not None else torch.zeros(())


def total_loss(
    eps_pred: torch.Tensor,
    eps: torch.Tensor,
    records: list[AttentionRecord],
    cfg: LossConfig,
) -> torch.Tensor:
    """``ldm + lambda * tra``; the regularizer is skipped entirely when lambda is 0."""
    return loss_components(eps_pred, eps, records, cfg)[2]


def loss_components(
    eps_pred: torch.Tensor,
    eps: torch.Tensor,
    records: list[AttentionRecord],
    cfg: LossConfig,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Return ``(ldm, tra, total)``."""
    ldm = ldm_loss(eps_pred, eps)
    tra = tra_loss(records, cfg).to(ldm) if records else ldm.new_zeros(())
    if cfg.lam == 0:
        return ldm, tra.detach(), ldm
    return ldm, tra, ldm + cfg.lam * tra
