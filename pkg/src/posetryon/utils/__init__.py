"""Utils module — configuration, console formatting, image I/O and runtime helpers."""

from posetryon.utils.config import Settings
from posetryon.utils.formatting import (
    console,
    format_checkpoint_table,
    format_eval_summary,
    format_loss_summary,
    format_settings_table,
    print_checkpoint,
    print_error,
    print_info,
    print_success,
)

__all__ = [
    "Settings",
    "console",
    "format_checkpoint_table",
    "format_eval_summary",
    "format_loss_summary",
    "format_settings_table",
    "print_checkpoint",
    "print_error",
    "print_info",
    "print_success",
]
