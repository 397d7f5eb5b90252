"""Seeding, determinism and device selection."""

from __future__ import annotations

import logging
import os
import random

import numpy as np
import torch

logger = logging.getLogger(__name__)


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch global generators."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def deterministic_mode(enabled: bool) -> None:
    """Toggle deterministic torch kernels.

    ``CUBLAS_WORKSPACE_CONFIG`` is set because CUDA matmuls refuse to run
    deterministically without it.
    """
    if enabled:
        os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
    torch.use_deterministic_algorithms(enabled)
    logger.debug("Deterministic algorithms %s", "enabled" if enabled else "disabled")


def resolve_device(name: str) -> torch.device:
    """Return the requested device, falling back to CPU when CUDA is absent."""
    if name.startswith("cuda") and not torch.cuda.is_available():
        logger.warning("CUDA requested but unavailable; using CPU")
        return torch.device("cpu")
    return torch.device(name)
