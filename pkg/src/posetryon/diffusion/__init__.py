"""Diffusion module — schedule, losses and DDIM sampling."""

from posetryon.diffusion.losses import (
    LossConfig,
    ldm_loss,
    loss_components,
    total_loss,
    tra_loss,
)
from posetryon.diffusion.sampler import ddim_sample, ddim_timesteps, guide, initial_noise
from posetryon.diffusion.schedule import NoiseSchedule, add_noise, q_sample

__all__ = [
    "LossConfig",
    "NoiseSchedule",
    "add_noise",
    "ddim_sample",
    "ddim_timesteps",
    "guide",
    "initial_noise",
    "ldm_loss",
    "loss_components",
    "q_sample",
    "total_loss",
    "tra_loss",
]
