"""Image quality, temporal flicker and attention-stability metrics."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from posetryon.diffusion.losses import LossConfig, tra_loss
from posetryon.diffusion.schedule import NoiseSchedule, add_noise
from posetryon.errors import PoseTryOnError, ShapeError
from posetryon.models import Phase
from posetryon.network.denoiser import DenoiseConditions, TryOnDenoiser

SSIM_WINDOW = 7
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class MetricsError(PoseTryOnError):
    """Raised when a metric cannot be computed for the given inputs."""


def _as_tensor(x: np.ndarray | torch.Tensor) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x) if not isinstance(x, torch.Tensor) else x).double()


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim_map(a: np.ndarray | torch.Tensor, b: np.ndarray | torch.Tensor) -> torch.Tensor:
    """Local SSIM over valid 7x7 windows, averaged over channels.

    Inputs are ``[H, W]`` or ``[C, H, W]`` in [0, 1]; the result is
    ``[H - 6, W - 6]``.
    """
    x, y = _as_tensor(a), _as_tensor(b)
    if x.shape != y.shape:
        raise ShapeError(f"ssim inputs differ in shape: {list(x.shape)} vs {list(y.shape)}")
    if x.ndim == 2:
        x, y = x[None], y[None]
    if x.ndim != 3:
        raise ShapeError(f"ssim expects [H, W] or [C, H, W], got {list(x.shape)}")
    if min(x.shape[-2:]) < SSIM_WINDOW:
        raise ShapeError(f"images must be at least {SSIM_WINDOW}px on each side")

    channels = x.shape[0]
    kernel = _gaussian_kernel().expand(channels, 1, SSIM_WINDOW, SSIM_WINDOW)

    def blur(z: torch.Tensor) -> torch.Tensor:
        return F.conv2d(z[None], kernel, groups=channels)[0]

    c1, c2 = SSIM_K1**2, SSIM_K2**2
    mu_x, mu_y = blur(x), blur(y)
    var_x = blur(x * x) - mu_x**2
    var_y = blur(y * y) - mu_y**2
    cov = blur(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return (num / den).mean(dim=0)


def ssim(
    a: np.ndarray | torch.Tensor,
    b: np.ndarray | torch.Tensor,
    mask: np.ndarray | torch.Tensor | None = None,
) -> float:
    """Mean SSIM; with ``mask`` only windows centred inside the mask count."""
    local = ssim_map(a, b)
    if mask is None:
        return float(local.mean())
    m = _as_tensor(mask)
    if m.ndim == 3:
        m = m.amax(dim=0)
    half = SSIM_WINDOW // 2
    if m.shape != _as_tensor(a).shape[-2:]:
        raise ShapeError(f"mask {list(m.shape)} does not match image {list(_as_tensor(a).shape)}")
    inside = m[half:-half, half:-half] > 0.5
    if not bool(inside.any()):
        raise MetricsError("mask covers no SSIM window centre")
    return float(local[inside].mean())


def video_ssim(
    video: np.ndarray | torch.Tensor,
    truth: np.ndarray | torch.Tensor,
    mask: np.ndarray | torch.Tensor | None = None,
) -> float:
    """Frame-averaged SSIM of two ``[T, C, H, W]`` videos."""
    v, g = _as_tensor(video), _as_tensor(truth)
    if v.shape != g.shape:
        raise ShapeError(f"videos differ in shape: {list(v.shape)} vs {list(g.shape)}")
    masks = [None] * v.shape[0] if mask is None else list(_as_tensor(mask))
    return float(np.mean([ssim(v[t], g[t], masks[t]) for t in range(v.shape[0])]))


def _pair_flicker(video: torch.Tensor, mask: torch.Tensor) -> float:
    diffs = []
    for t in range(video.shape[0] - 1):
        union = torch.maximum(mask[t], mask[t + 1]).expand_as(video[t])
        area = union.sum()
        if area == 0:
            diffs.append(0.0)
            continue
        delta = (video[t + 1] - video[t]).abs()
        diffs.append(float((delta * union).sum() / area))
    return float(np.mean(diffs))


def flicker_index(
    video: np.ndarray | torch.Tensor,
    mask: np.ndarray | torch.Tensor,
    truth: np.ndarray | torch.Tensor | None = None,
) -> tuple[float, float]:
    """Masked frame-to-frame change, raw and in excess of the ground truth's.

    Each consecutive pair is measured over the union of its two masks.

    Returns:
        ``(raw, excess)``; ``excess`` is 0 when no truth is given.
    """
    v, m = _as_tensor(video), _as_tensor(mask)
    if v.ndim != 4:
        raise ShapeError(f"video must be [T, C, H, W], got {list(v.shape)}")
    if v.shape[0] < 2:
        raise MetricsError(f"flicker needs at least 2 frames, got {v.shape[0]}")
    if m.shape[0] != v.shape[0] or m.shape[-2:] != v.shape[-2:]:
        raise ShapeError(f"mask {list(m.shape)} does not match video {list(v.shape)}")
    raw = _pair_flicker(v, m)
    if truth is None:
        return raw, 0.0
    g = _as_tensor(truth)
    if g.shape != v.shape:
        raise ShapeError(f"truth {list(g.shape)} does not match video {list(v.shape)}")
    return raw, raw - _pair_flicker(g, m)


@torch.no_grad()
def tra_statistic(
    model: TryOnDenoiser,
    cond: DenoiseConditions,
    z0: torch.Tensor,
    schedule: NoiseSchedule,
    *,
    seed: int = 0,
    gamma: float = 0.5,
) -> float:
    """TRA loss of ``model`` at timestep ``N_t // 2``, averaged over the batch.

    One noise sample per clip is shared by all frames.
    """
    b, t = z0.shape[:2]
    generator = torch.Generator().manual_seed(seed)
    eps = torch.randn((b, 1, *z0.shape[2:]), generator=generator, dtype=z0.dtype)
    eps = eps.expand_as(z0).to(z0.device)
    step = torch.full((b,), schedule.num_steps // 2, dtype=torch.long, device=z0.device)
    z_t = add_noise(schedule, z0, eps, step)
    model.eval()
    _, records = model(z_t, step, cond, mode=Phase.VIDEO)
    if t < 2:
        return 0.0
    value = tra_loss(records, LossConfig(gamma=gamma, tra_layers=len(records)))
    return float(value)
