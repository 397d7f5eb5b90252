"""Deterministic DDIM sampling with classifier-free guidance."""

from __future__ import annotations

import logging
import math
from typing import Callable

import numpy as np
import torch

from posetryon.diffusion.schedule import NoiseSchedule
from posetryon.errors import ConfigurationError

logger = logging.getLogger(__name__)

EpsFn = Callable[[torch.Tensor, int, bool], torch.Tensor]
"""``eps_fn(z_t, t, conditional) -> eps``."""


def guide(eps_cond: torch.Tensor, eps_uncond: torch.Tensor, scale: float) -> torch.Tensor:
    """``eps_u + s * (eps_c - eps_u)``; exactly ``eps_c`` when ``s == 1``."""
    if scale == 1.0:
        return eps_cond
    return eps_uncond + scale * (eps_cond - eps_uncond)


def ddim_timesteps(num_train_steps: int, steps: int) -> list[int]:
    """Evenly spaced descending timesteps from ``N_t - 1`` down to 0."""
    if steps <= 0:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    if steps > num_train_steps:
        raise ConfigurationError(f"steps {steps} exceeds schedule length {num_train_steps}")
    return [int(t) for t in np.round(np.linspace(num_train_steps - 1, 0, steps))]


def initial_noise(
    shape: tuple[int, ...], seed: int, dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """Gaussian noise drawn from a CPU generator so results match across devices."""
    generator = torch.Generator().manual_seed(seed)
    return torch.randn(shape, generator=generator, dtype=dtype)


@torch.no_grad()
def ddim_sample(
    eps_fn: EpsFn,
    init_noise: torch.Tensor,
    schedule: NoiseSchedule,
    steps: int,
    guidance_scale: float = 1.5,
) -> torch.Tensor:
    """Run an eta=0 DDIM trajectory from ``init_noise`` and return the clean latent.

    The unconditional branch is skipped when ``guidance_scale == 1`` and the
    conditional one when it is 0.
    """
    if guidance_scale < 0:
        raise ConfigurationError(f"guidance scale must be >= 0, got {guidance_scale}")
    timesteps = ddim_timesteps(schedule.num_steps, steps)

    z = init_noise
    for i, t in enumerate(timesteps):
        if guidance_scale == 1.0:
            eps = eps_fn(z, t, True)
        elif guidance_scale == 0.0:
            eps = eps_fn(z, t, False)
        else:
            eps = guide(eps_fn(z, t, True), eps_fn(z, t, False), guidance_scale)

        a_t = float(schedule.alpha_bar[t])
        a_prev = float(schedule.alpha_bar[timesteps[i + 1]]) if i + 1 < len(timesteps) else 1.0
        x0 = (z - math.sqrt(1.0 - a_t) * eps) / math.sqrt(a_t)
        z = math.sqrt(a_prev) * x0 + math.sqrt(1.0 - a_prev) * eps
        logger.debug("ddim step %d/%d t=%d", i + 1, len(timesteps), t)
    return z
