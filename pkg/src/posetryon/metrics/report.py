"""Dataset-level evaluation and the metrics CSV."""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from posetryon.diffusion.schedule import NoiseSchedule
from posetryon.inference.pipeline import TryOnPipeline
from posetryon.metrics.quality import flicker_index, tra_statistic, video_ssim
from posetryon.models import EvalRow, ManifestEntry, Split
from posetryon.network.denoiser import TryOnDenoiser
from posetryon.synth.dataset import load_sample, read_manifest
from posetryon.synth.generator import TryOnSample
from posetryon.training.batches import encode_batch, sample_batch
from posetryon.utils.config import Settings

logger = logging.getLogger(__name__)

EVAL_HEADER = "sample_id,ssim,flicker_raw,flicker_excess,tra_stat"


def held_out_entries(data_root: str | Path) -> list[ManifestEntry]:
    """Manifest entries marked ``test``."""
    return [e for e in read_manifest(data_root) if e.split is Split.TEST]


def evaluate_sample(
    sample_id: str,
    sample: TryOnSample,
    model: TryOnDenoiser | None,
    settings: Settings,
    *,
    steps: int | None = None,
    seed: int = 0,
    ground_truth: bool = False,
) -> EvalRow:
    """Score one paired sample against its target video.

    With ``ground_truth`` the target itself is scored (a bypass that checks the
    metric plumbing); ``tra_stat`` is then NaN unless a model is given.
    """
    truth = sample.target_video
    if ground_truth:
        output = truth
    else:
        if model is None:
            raise ValueError("a model is required unless ground_truth is set")
        pipeline = TryOnPipeline.from_settings(model, settings)
        window = settings.resolved_window()
        result = pipeline.run(
            sample,
            window=window,
            stride=settings.sample.stride or max(1, window // 2),
            steps=steps or settings.sample.steps,
            guidance=settings.sample.guidance,
            seed=seed,
        )
        output = result.composited

    score = video_ssim(output, truth)
    if sample.num_frames >= 2:
        raw, excess = flicker_index(output, sample.agnostic_mask, truth)
    else:
        raw, excess = 0.0, 0.0

    tra = math.nan
    if model is not None and sample.num_frames >= 2:
        d = settings.diffusion
        schedule = NoiseSchedule.linear(d.num_steps, d.beta_start, d.beta_end)
        device = next(model.parameters()).device
        length = min(sample.num_frames, settings.train.clip_length)
        z0, cond = encode_batch(sample_batch(sample, 0, length), model.codec, device)
        tra = tra_statistic(model, cond, z0, schedule, seed=seed)

    return EvalRow(
        sample_id=sample_id, ssim=score, flicker_raw=raw, flicker_excess=excess, tra_stat=tra
    )


def evaluate_dataset(
    data_root: str | Path,
    model: TryOnDenoiser | None,
    settings: Settings,
    *,
    steps: int | None = None,
    seed: int = 0,
    ground_truth: bool = False,
) -> list[EvalRow]:
    """Evaluate every test entry under ``data_root``."""
    rows = []
    for entry in held_out_entries(data_root):
        sample = load_sample(data_root, entry)
        row = evaluate_sample(
            entry.sample_dir,
            sample,
            model,
            settings,
            steps=steps,
            seed=seed,
            ground_truth=ground_truth,
        )
        logger.info("Evaluated %s: ssim=%.4f", entry.sample_dir, row.ssim)
        rows.append(row)
    return rows


def write_report(rows: list[EvalRow], path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [EVAL_HEADER, *(r.to_csv_row() for r in rows)]
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def summarize(rows: list[EvalRow]) -> dict[str, float]:
    """Column means; NaN entries are ignored, empty columns give NaN."""
    summary: dict[str, float] = {}
    for column in ("ssim", "flicker_raw", "flicker_excess", "tra_stat"):
        values = np.array([getattr(r, column) for r in rows], dtype=np.float64)
        values = values[~np.isnan(values)]
        summary[column] = float(values.mean()) if values.size else math.nan
    return summary
