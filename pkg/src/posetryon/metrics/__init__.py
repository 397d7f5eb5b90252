"""Metrics module — SSIM, flicker index, TRA statistic and evaluation reports."""

from posetryon.metrics.quality import (
    MetricsError,
    flicker_index,
    ssim,
    ssim_map,
    tra_statistic,
    video_ssim,
)
from posetryon.metrics.report import (
    EVAL_HEADER,
    evaluate_dataset,
    evaluate_sample,
    summarize,
    write_report,
)

__all__ = [
    "EVAL_HEADER",
    "MetricsError",
    "evaluate_dataset",
    "evaluate_sample",
    "flicker_index",
    "ssim",
    "ssim_map",
    "summarize",
    "tra_statistic",
    "video_ssim",
    "write_report",
]
