"""Linear beta schedule and the forward noising process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from posetryon.errors import ConfigurationError


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep coefficients, stored in float64."""

    num_steps: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        if beta.shape != (self.num_steps,) or alpha_bar.shape != (self.num_steps,):
            raise ConfigurationError(f"schedule arrays must have length {self.num_steps}")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ConfigurationError("beta must lie strictly inside (0, 1)")
        if self.num_steps > 1 and np.any(np.diff(beta) <= 0):
            raise ConfigurationError("beta must be strictly increasing")
        if np.any(alpha_bar <= 0) or np.any(alpha_bar >= 1) or np.any(np.diff(alpha_bar) >= 0):
            raise ConfigurationError("alpha_bar must be strictly decreasing inside (0, 1)")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @classmethod
    def linear(
        cls, num_steps: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02
    ) -> "NoiseSchedule":
        if num_steps < 1:
            raise ConfigurationError(f"num_steps must be >= 1, got {num_steps}")
        if num_steps > 1 and beta_end <= beta_start:
            raise ConfigurationError("beta_end must exceed beta_start")
        beta = np.linspace(beta_start, beta_end, num_steps, dtype=np.float64)
        return cls(num_steps, beta, np.cumprod(1.0 - beta))

    def alpha_bar_at(self, t: int | torch.Tensor) -> torch.Tensor:
        """``alpha_bar`` at integer timestep(s); raises ``IndexError`` when out of range."""
        idx = torch.as_tensor(t, dtype=torch.long)
        if bool(((idx < 0) | (idx >= self.num_steps)).any()):
            raise IndexError(f"timestep {idx.tolist()} outside [0, {self.num_steps})")
        return torch.from_numpy(self.alpha_bar)[idx]


def q_sample(z0: torch.Tensor, eps: torch.Tensor, alpha_bar: float | torch.Tensor) -> torch.Tensor:
    """``sqrt(a) * z0 + sqrt(1 - a) * eps`` for a given cumulative alpha."""
    a = torch.as_tensor(alpha_bar, dtype=z0.dtype, device=z0.device)
    return a.sqrt() * z0 + (1.0 - a).sqrt() * eps


def add_noise(
    schedule: NoiseSchedule, z0: torch.Tensor, eps: torch.Tensor, t: int | torch.Tensor
) -> torch.Tensor:
    """Noise ``z0`` to timestep ``t``.

    ``t`` is an int or a ``[B]`` tensor indexing the leading axis of ``z0``.
    """
    if z0.shape != eps.shape:
        raise ValueError(f"z0 {list(z0.shape)} and eps {list(eps.shape)} differ")
    a = schedule.alpha_bar_at(t).to(device=z0.device, dtype=z0.dtype)
    if a.ndim == 1:
        a = a.view(-1, *([1] * (z0.ndim - 1)))
    return q_sample(z0, eps, a)
