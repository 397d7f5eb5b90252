"""Rich formatting helpers for CLI output."""

from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING, Any

from rich.console import Console
from rich.panel import Panel
from rich.syntax import Syntax
from rich.table import Table
from rich.text import Text

if TYPE_CHECKING:
    from posetryon.models import LossRecord
    from posetryon.training.checkpoint import CheckpointContainer

console = Console()


# ---------------------------------------------------------------------------
# Settings table
# ---------------------------------------------------------------------------


def format_settings_table(values: dict[str, Any], sources: dict[str, str]) -> Table:
    """Build a table of dotted settings with the layer each value came from."""
    table = Table(title="PoseTryOn Configuration", show_lines=False)
    table.add_column("Setting", style="bold cyan")
    table.add_column("Value")
    table.add_column("Source", style="dim")
    for key, value in values.items():
        table.add_row(key, "—" if value is None else str(value), sources.get(key, "default"))
    return table


# ---------------------------------------------------------------------------
# Checkpoint inspection
# ---------------------------------------------------------------------------


def format_checkpoint_table(container: "CheckpointContainer", *, limit: int | None = None) -> Table:
    """Parameter entries of a checkpoint: name, shape and element count."""
    table = Table(
        title=f"Checkpoint v{container.version} — iteration {container.iteration}",
        show_lines=False,
    )
    table.add_column("Parameter", style="bold")
    table.add_column("Shape")
    table.add_column("Elements", justify="right")

    items = list(container.params.items())
    shown = items if limit is None else items[:limit]
    for name, array in shown:
        table.add_row(name, "×".join(str(d) for d in array.shape) or "scalar", f"{array.size:,}")
    if len(shown) < len(items):
        table.add_row(f"… {len(items) - len(shown)} more", "", "")
    total = sum(a.size for a in container.params.values())
    table.caption = (
        f"{len(items)} parameter entries, {total:,} values; "
        f"{len(container.optimizer)} optimizer entries"
    )
    return table


def print_checkpoint(container: "CheckpointContainer", *, limit: int | None = None) -> None:
    """Print the config snapshot and the parameter table of a checkpoint."""
    console.print()
    snapshot = json.dumps(container.config, indent=2, sort_keys=True)
    console.print(Panel(Syntax(snapshot, "json"), title="[bold cyan]Config snapshot[/]",
                        border_style="cyan"))
    console.print(format_checkpoint_table(container, limit=limit))
    console.print()


# ---------------------------------------------------------------------------
# Run summaries
# ---------------------------------------------------------------------------


def format_eval_summary(summary: dict[str, float], count: int) -> Table:
    table = Table(title=f"Evaluation — {count} test samples")
    table.add_column("Metric", style="bold")
    table.add_column("Mean", justify="right")
    for name, value in summary.items():
        table.add_row(name, "n/a" if math.isnan(value) else f"{value:.6f}")
    return table


def format_loss_summary(records: list["LossRecord"], window: int = 50) -> Table:
    """Leading and trailing mean losses of a training run."""
    table = Table(title="Training losses")
    table.add_column("Span", style="bold")
    table.add_column("ldm", justify="right")
    table.add_column("tra", justify="right")
    table.add_column("total", justify="right")
    for label, chunk in (("first", records[:window]), ("last", records[-window:])):
        if not chunk:
            continue
        n = len(chunk)
        table.add_row(
            f"{label} {n}",
            f"{sum(r.ldm for r in chunk) / n:.5f}",
            f"{sum(r.tra for r in chunk) / n:.5f}",
            f"{sum(r.total for r in chunk) / n:.5f}",
        )
    return table


# ---------------------------------------------------------------------------
# Generic helpers
# ---------------------------------------------------------------------------


def print_error(message: str) -> None:
    """Print a styled error message."""
    console.print(Text(f"✖ {message}", style="bold red"))


def print_success(message: str) -> None:
    """Print a styled success message."""
    console.print(Text(f"✔ {message}", style="bold green"))


def print_info(message: str) -> None:
    """Print a styled informational message."""
    console.print(Text(f"ℹ {message}", style="bold blue"))
