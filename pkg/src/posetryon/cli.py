"""CLI entry point for PoseTryOn (Click-based).

Commands:
    make-data  Generate a synthetic try-on dataset
    train      Train a denoiser on a dataset
    sample     Dress a video in a garment with a trained checkpoint
    eval       Score the test split and write a metrics CSV
    inspect    Print the contents of a checkpoint
    config     Show or initialise the configuration file

Exit codes: 0 success, 2 usage/config/data errors, 3 non-finite loss,
4 corrupt or incompatible checkpoint.
"""

from __future__ import annotations

import contextlib
import json
import logging
import re
from pathlib import Path
from typing import Any, Iterator

import click
from rich.console import Console

from posetryon import __version__
from posetryon.errors import PoseTryOnError
from posetryon.utils.config import LATENT_FACTOR, Settings

console = Console()

EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_CHECKPOINT = 4


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )


@contextlib.contextmanager
def _exit_on_error(ctx: click.Context) -> Iterator[None]:
    """Print package errors and exit with the matching code."""
    from posetryon.training.checkpoint import CheckpointFormatError, CheckpointMismatchError
    from posetryon.utils.formatting import print_error

    try:
        yield
    except (CheckpointFormatError, CheckpointMismatchError) as exc:
        print_error(f"Checkpoint error: {exc}")
        ctx.exit(EXIT_CHECKPOINT)
    except PoseTryOnError as exc:
        print_error(str(exc))
        ctx.exit(EXIT_USAGE)
    except OSError as exc:
        print_error(str(exc))
        ctx.exit(EXIT_USAGE)


def _load_settings(
    ctx: click.Context, config_file: str | None = None, extra: dict[str, Any] | None = None
) -> Settings:
    overrides = dict(ctx.obj["overrides"])
    overrides.update(extra or {})
    return Settings.load(overrides, config_file=config_file)


class FrameSize(click.ParamType):
    """``HxW`` canvas size; both sides must be divisible by the latent factor."""

    name = "HxW"

    def convert(self, value: Any, param: click.Parameter | None, ctx: click.Context | None):
        if isinstance(value, tuple):
            return value
        match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", str(value))
        if not match:
            self.fail(f"{value!r} is not of the form HxW (e.g. 64x48)", param, ctx)
        height, width = int(match.group(1)), int(match.group(2))
        if height <= 0 or width <= 0 or height % LATENT_FACTOR or width % LATENT_FACTOR:
            self.fail(
                f"{height}x{width}: height and width must be positive and divisible by "
                f"{LATENT_FACTOR}",
                param,
                ctx,
            )
        return height, width


# ── Main CLI group ───────────────────────────────────────────────────


@click.group(invoke_without_command=True)
@click.option("--log-level", "-l", default=None, help="Logging level.")
@click.option("--device", default=None, help="Torch device (cpu, cuda, cuda:1, ...).")
@click.version_option(__version__, prog_name="posetryon")
@click.pass_context
def main(ctx: click.Context, log_level: str | None, device: str | None) -> None:
    """👕 PoseTryOn — pose-aware video virtual try-on at desk scale."""
    from posetryon.utils.formatting import print_error

    overrides: dict[str, str] = {}
    if log_level:
        overrides["log_level"] = log_level
    if device:
        overrides["device"] = device

    try:
        settings = Settings.load(overrides)
    except PoseTryOnError as exc:
        print_error(str(exc))
        ctx.exit(EXIT_USAGE)
    _configure_logging(settings.log_level)

    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings
    ctx.obj["overrides"] = overrides

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


# ── make-data ────────────────────────────────────────────────────────


@main.command(name="make-data")
@click.option("--out", "-o", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory to write the dataset to.")
@click.option("--count", "-n", default=16, show_default=True, type=click.IntRange(min=0),
              help="Number of samples.")
@click.option("--seed", "-s", default=0, show_default=True, type=int, help="Dataset seed.")
@click.option("--frames", "-t", default=None, type=click.IntRange(min=1),
              help="Frames per clip (default: data.num_frames).")
@click.option("--size", default=None, type=FrameSize(),
              help="Canvas size HxW, divisible by 4 (default: data canvas).")
@click.option("--test-count", default=0, show_default=True, type=click.IntRange(min=0),
              help="Mark the last N samples as the test split.")
@click.pass_context
def make_data(
    ctx: click.Context,
    out_dir: str,
    count: int,
    seed: int,
    frames: int | None,
    size: tuple[int, int] | None,
    test_count: int,
) -> None:
    """Generate a synthetic try-on dataset and its manifest."""
    from posetryon.synth.dataset import manifest_path, write_dataset
    from posetryon.synth.generator import random_scene_specs
    from posetryon.utils.formatting import print_success

    if test_count > count:
        raise click.BadParameter(
            f"cannot mark {test_count} of {count} samples as test", param_hint="--test-count"
        )
    settings: Settings = ctx.obj["settings"]
    data = settings.data
    canvas = size or (data.canvas_height, data.canvas_width)

    with _exit_on_error(ctx):
        specs = random_scene_specs(
            count, seed, num_frames=frames or data.num_frames, canvas_size=canvas
        )
        with console.status(f"[bold cyan]Rendering {count} samples…[/]"):
            write_dataset(specs, out_dir, test_count=test_count)

    print_success(f"Wrote {count} samples ({test_count} test)")
    click.echo(str(manifest_path(out_dir)))


# ── train ────────────────────────────────────────────────────────────


@main.command()
@click.option("--data", "-d", "data_root", required=True,
              type=click.Path(exists=True, file_okay=False), help="Dataset directory.")
@click.option("--config", "-c", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False), help="Config file (posetryon.toml).")
@click.option("--out", "-o", "out_dir", default="runs/train", show_default=True,
              type=click.Path(file_okay=False), help="Output directory for checkpoints and log.")
@click.option("--resume", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Checkpoint to resume from.")
@click.option("--iters", default=None, type=click.IntRange(min=0),
              help="Override train.total_iters.")
@click.pass_context
def train(
    ctx: click.Context,
    data_root: str,
    config_file: str | None,
    out_dir: str,
    resume: str | None,
    iters: int | None,
) -> None:
    """Train a try-on denoiser; writes checkpoints and train_log.csv."""
    from posetryon.training.trainer import NonFiniteLossError
    from posetryon.training.trainer import train as run_training
    from posetryon.utils.formatting import (
        format_loss_summary,
        print_error,
        print_info,
        print_success,
    )

    with _exit_on_error(ctx):
        extra = {"train.total_iters": iters} if iters is not None else None
        settings = _load_settings(ctx, config_file, extra)
        total = settings.train.total_iters
        try:
            with console.status("[bold cyan]Training…[/]") as status:
                result = run_training(
                    data_root,
                    settings,
                    out_dir,
                    resume=resume,
                    on_step=lambda r: status.update(
                        f"[bold cyan]Training…[/] iter {r.iteration + 1}/{total} "
                        f"[dim]{r.phase.value}[/] loss {r.total:.4f}"
                    ),
                )
        except NonFiniteLossError as exc:
            dump = Path(out_dir) / f"nonfinite_step_{exc.step:06d}.json"
            dump.parent.mkdir(parents=True, exist_ok=True)
            dump.write_text(json.dumps(exc.to_dict(), indent=2), encoding="utf-8")
            print_error(f"{exc}; diagnostics written to {dump}")
            ctx.exit(EXIT_NUMERIC)

    if result.records:
        console.print(format_loss_summary(result.records))
    if result.codec_mae is not None:
        print_info(f"Codec reconstruction MAE: {result.codec_mae:.4f}")
    print_success(f"Checkpoint written to {result.checkpoint}")
    click.echo(str(result.checkpoint))


# ── sample ───────────────────────────────────────────────────────────


@main.command()
@click.option("--ckpt", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Trained checkpoint.")
@click.option("--video", required=True, type=click.Path(exists=True, file_okay=False),
              help="Sample directory holding the person video.")
@click.option("--garment", default=None, type=click.Path(exists=True),
              help="Garment PNG or another sample directory (default: the video's own).")
@click.option("--out", "-o", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for output frames.")
@click.option("--window", default=None, type=click.IntRange(min=1),
              help="Frames per window (default: training clip length).")
@click.option("--stride", default=None, type=click.IntRange(min=1),
              help="Window stride (default: half the window).")
@click.option("--steps", default=None, type=click.IntRange(min=1),
              help="DDIM steps (default: sample.steps).")
@click.option("--guidance", default=None, type=click.FloatRange(min=0.0),
              help="Classifier-free guidance scale (default: sample.guidance = 1.5).")
@click.option("--seed", default=None, type=int, help="Noise seed (default: sample.seed).")
@click.option("--config", "-c", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Config file overriding the checkpoint's snapshot.")
@click.pass_context
def sample(
    ctx: click.Context,
    ckpt: str,
    video: str,
    garment: str | None,
    out_dir: str,
    window: int | None,
    stride: int | None,
    steps: int | None,
    guidance: float | None,
    seed: int | None,
    config_file: str | None,
) -> None:
    """Generate try-on frames for one video and write a contact sheet."""
    from posetryon.inference.pipeline import restore_denoiser, tryon_video
    from posetryon.synth.dataset import infer_garment_kind, load_sample_dir
    from posetryon.utils.formatting import print_success
    from posetryon.utils.imageio import contact_sheet, save_png
    from posetryon.utils.runtime import deterministic_mode, resolve_device

    base: Settings = ctx.obj["settings"]
    with _exit_on_error(ctx):
        deterministic_mode(base.deterministic)
        model, settings = restore_denoiser(
            ckpt, config_file=config_file, device=resolve_device(base.device)
        )
        with console.status("[bold cyan]Sampling…[/]"):
            result = tryon_video(
                model,
                settings,
                video,
                garment,
                window=window,
                stride=stride,
                steps=steps,
                guidance=guidance,
                seed=seed,
            )
        source = load_sample_dir(video, infer_garment_kind(video))

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for t, frame in enumerate(result.composited):
            save_png(frame, out / f"frame_{t:04d}.png")
        sheet = contact_sheet(
            [list(source.source_video), list(source.agnostic_video), list(result.composited)],
            out / "contact_sheet.png",
        )

    print_success(f"Wrote {len(result.composited)} frames over {len(result.windows)} windows")
    click.echo(str(sheet))


# ── eval ─────────────────────────────────────────────────────────────


@main.command(name="eval")
@click.option("--ckpt", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Trained checkpoint (optional with --ground-truth).")
@click.option("--data", "-d", "data_root", required=True,
              type=click.Path(exists=True, file_okay=False), help="Dataset directory.")
@click.option("--out", "-o", "out_path", default="eval.csv", show_default=True,
              type=click.Path(dir_okay=False), help="Metrics CSV path.")
@click.option("--ground-truth", is_flag=True,
              help="Score the target videos themselves instead of model output.")
@click.option("--steps", default=None, type=click.IntRange(min=1), help="DDIM steps.")
@click.option("--seed", default=0, show_default=True, type=int, help="Noise seed.")
@click.option("--config", "-c", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Config file overriding the checkpoint's snapshot.")
@click.pass_context
def evaluate(
    ctx: click.Context,
    ckpt: str | None,
    data_root: str,
    out_path: str,
    ground_truth: bool,
    steps: int | None,
    seed: int,
    config_file: str | None,
) -> None:
    """Evaluate every test sample and write sample_id,ssim,flicker_raw,flicker_excess,tra_stat."""
    from posetryon.inference.pipeline import restore_denoiser
    from posetryon.metrics.report import evaluate_dataset, summarize, write_report
    from posetryon.utils.formatting import format_eval_summary, print_success
    from posetryon.utils.runtime import resolve_device

    if ckpt is None and not ground_truth:
        raise click.UsageError("--ckpt is required unless --ground-truth is given")

    base: Settings = ctx.obj["settings"]
    with _exit_on_error(ctx):
        model = None
        settings = _load_settings(ctx, config_file)
        if ckpt is not None:
            model, settings = restore_denoiser(
                ckpt, config_file=config_file, device=resolve_device(base.device)
            )
        with console.status("[bold cyan]Evaluating…[/]"):
            rows = evaluate_dataset(
                data_root, model, settings, steps=steps, seed=seed, ground_truth=ground_truth
            )
        report = write_report(rows, out_path)

    summary = summarize(rows)
    console.print(format_eval_summary(summary, len(rows)))
    click.echo(" ".join(f"mean_{k}={v:.6f}" for k, v in summary.items()))
    print_success(f"Metrics written to {report}")


# ── inspect ──────────────────────────────────────────────────────────


@main.command()
@click.option("--ckpt", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Checkpoint to inspect.")
@click.option("--limit", default=40, show_default=True, type=click.IntRange(min=1),
              help="Maximum parameter rows to list.")
@click.pass_context
def inspect(ctx: click.Context, ckpt: str, limit: int) -> None:
    """Show format version, iteration, config snapshot and parameter entries."""
    from posetryon.training.checkpoint import load_checkpoint
    from posetryon.utils.formatting import print_checkpoint

    with _exit_on_error(ctx):
        container = load_checkpoint(ckpt)
        print_checkpoint(container, limit=limit)


# ── config ───────────────────────────────────────────────────────────


@main.group()
@click.pass_context
def config(ctx: click.Context) -> None:
    """Manage PoseTryOn configuration.

    View and create ``posetryon.toml`` settings files.
    """
    pass


@config.command(name="init")
@click.option("--force", "-f", is_flag=True, help="Overwrite existing config file.")
@click.option("--path", "target", default=None, type=click.Path(dir_okay=False),
              help="Where to write (default: ./posetryon.toml).")
@click.pass_context
def config_init(ctx: click.Context, force: bool, target: str | None) -> None:
    """Write a posetryon.toml with every setting at its default value."""
    from posetryon.utils.config import config_path, write_config

    path = Path(target) if target else config_path()
    if path.is_file() and not force:
        console.print(
            f"[yellow]Config already exists:[/] {path}\n"
            "Use [bold]--force[/] to overwrite."
        )
        return

    write_config(Settings(), path)
    console.print(f"\n[green]✓[/] Config written to [bold]{path}[/]")


@config.command(name="show")
@click.option("--config", "-c", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False), help="Config file to resolve.")
@click.pass_context
def config_show(ctx: click.Context, config_file: str | None) -> None:
    """Display the resolved configuration and where each value came from."""
    from posetryon.utils.config import setting_sources
    from posetryon.utils.formatting import format_settings_table

    with _exit_on_error(ctx):
        settings = _load_settings(ctx, config_file)
        sources = setting_sources(ctx.obj["overrides"], config_file=config_file)
    console.print(format_settings_table(settings.to_dotted(), sources))
