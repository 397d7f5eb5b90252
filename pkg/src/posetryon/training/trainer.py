"""Joint image/video training loop with phase-gated parameter groups."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from torch import nn

from posetryon.diffusion.losses import LossConfig, loss_components
from posetryon.diffusion.schedule import NoiseSchedule, add_noise
from posetryon.errors import DataError, PoseTryOnError
from posetryon.models import LossRecord, Phase, Split, TrainMode
from posetryon.network.codec import fit_codec
from posetryon.network.denoiser import TryOnDenoiser
from posetryon.synth.dataset import load_sample, read_manifest
from posetryon.synth.generator import TryOnSample
from posetryon.training.batches import BatchPolicy, encode_batch, make_batch
from posetryon.training.checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
from posetryon.utils.config import Settings
from posetryon.utils.runtime import deterministic_mode, resolve_device, seed_everything

logger = logging.getLogger(__name__)

LOG_HEADER = "iter,phase,ldm,tra,total"
FINAL_CHECKPOINT = "final.ckpt"

SPATIAL_MODULES = frozenset({"pasa", "pasa_norm", "cross_attn", "cross_attn_norm"})
TEMPORAL_MODULES = frozenset({"tsa", "tsa_norm", "pata", "pata_norm"})


class NonFiniteLossError(PoseTryOnError):
    """Raised when a loss component becomes NaN or infinite."""

    def __init__(self, step: int, phase: Phase, components: dict[str, float]) -> None:
        self.step = step
        self.phase = phase
        self.components = components
        parts = ", ".join(f"{k}={v}" for k, v in components.items())
        super().__init__(f"non-finite loss at step {step} ({phase.value} phase): {parts}")

    def to_dict(self) -> dict:
        return {"step": self.step, "phase": self.phase.value, "components": self.components}


def partition_parameters(model: TryOnDenoiser) -> dict[str, list[tuple[str, nn.Parameter]]]:
    """Split trainable parameters into ``spatial``, ``temporal`` and ``shared`` groups.

    Spatial covers PASA and cross-attention (adapters included); temporal covers
    TSA and PATA. Everything else outside the codec is shared.
    """
    groups: dict[str, list[tuple[str, nn.Parameter]]] = {
        "spatial": [],
        "temporal": [],
        "shared": [],
    }
    for name, param in model.trainable_parameters():
        parts = set(name.split("."))
        if parts & SPATIAL_MODULES:
            groups["spatial"].append((name, param))
        elif parts & TEMPORAL_MODULES:
            groups["temporal"].append((name, param))
        else:
            groups["shared"].append((name, param))
    return groups


def phase_for(iteration: int, mode: TrainMode) -> Phase:
    """Image phase on even iterations, video on odd; always image in image mode."""
    if mode is TrainMode.IMAGE or iteration % 2 == 0:
        return Phase.IMAGE
    return Phase.VIDEO


class Trainer:
    """Owns the optimizer and performs single training iterations."""

    def __init__(
        self,
        model: TryOnDenoiser,
        settings: Settings,
        samples: list[TryOnSample],
        *,
        device: torch.device | str = "cpu",
    ) -> None:
        self.model = model
        self.settings = settings
        self.samples = samples
        self.device = torch.device(device)
        self.iteration = 0

        tcfg = settings.train
        self.schedule = NoiseSchedule.linear(
            settings.diffusion.num_steps,
            settings.diffusion.beta_start,
            settings.diffusion.beta_end,
        )
        self.groups = partition_parameters(model)
        self.optimizer = torch.optim.Adam(
            [p for _, p in model.trainable_parameters()],
            lr=tcfg.learning_rate,
            betas=(0.9, 0.999),
            eps=1e-8,
        )
        self.policy = BatchPolicy(
            keypoint_drop_prob=tcfg.keypoint_drop_prob,
            garment_cond_drop_prob=tcfg.garment_cond_drop_prob,
            flip_prob=tcfg.flip_prob,
        )
        tra_layers = settings.model.tra_layers
        self.loss_cfgs = {
            Phase.IMAGE: LossConfig(lam=tcfg.lambda_image, tra_layers=tra_layers),
            Phase.VIDEO: LossConfig(lam=tcfg.lambda_video, tra_layers=tra_layers),
        }

    def _activate(self, phase: Phase) -> None:
        inactive = "temporal" if phase is Phase.IMAGE else "spatial"
        for group, params in self.groups.items():
            for _, param in params:
                param.requires_grad_(group != inactive)

    def step(self) -> LossRecord:
        """Run one iteration and return its loss record."""
        tcfg = self.settings.train
        it = self.iteration
        phase = phase_for(it, tcfg.mode)
        self._activate(phase)

        # Per-iteration streams keep resumed runs on the same trajectory.
        rng = np.random.default_rng([tcfg.seed, it])
        generator = torch.Generator().manual_seed(tcfg.seed * 1_000_003 + it)

        batch = make_batch(self.samples, phase, tcfg.batch_size, tcfg.clip_length, rng, self.policy)
        z0, cond = encode_batch(batch, self.model.codec, self.device)
        timesteps = torch.randint(
            0, self.schedule.num_steps, (batch.batch_size,), generator=generator
        )
        eps = torch.randn(z0.shape, generator=generator, dtype=z0.dtype).to(self.device)
        timesteps = timesteps.to(self.device)
        z_t = add_noise(self.schedule, z0, eps, timesteps)

        self.model.train()
        self.model.codec.eval()
        eps_pred, records = self.model(
            z_t, timesteps, cond, mode=phase, garment_keep=batch.garment_keep.to(self.device)
        )
        ldm, tra, total = loss_components(eps_pred, eps, records, self.loss_cfgs[phase])
        values = {"ldm": float(ldm), "tra": float(tra), "total": float(total)}
        if not all(math.isfinite(v) for v in values.values()):
            raise NonFiniteLossError(it, phase, values)

        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        self.optimizer.step()

        self.iteration += 1
        return LossRecord(iteration=it, phase=phase, **values)


@dataclass
class TrainResult:
    checkpoint: Path
    log_path: Path
    records: list[LossRecord] = field(default_factory=list)
    codec_mae: float | None = None


def load_training_samples(data_root: str | Path) -> list[TryOnSample]:
    """Load train-split samples, or every sample when none is marked ``train``."""
    entries = read_manifest(data_root)
    if not entries:
        raise DataError(f"manifest under {data_root} lists no samples")
    chosen = [e for e in entries if e.split is Split.TRAIN] or entries
    return [load_sample(data_root, e) for e in chosen]


def _codec_frames(samples: list[TryOnSample]) -> torch.Tensor:
    arrays = []
    for s in samples:
        arrays.extend([s.target_video, s.source_video, s.agnostic_video, s.garment_image[None]])
    return torch.from_numpy(np.concatenate(arrays))


def train(
    data_root: str | Path,
    settings: Settings,
    out_dir: str | Path,
    *,
    resume: str | Path | None = None,
    on_step: Callable[[LossRecord], None] | None = None,
) -> TrainResult:
    """Train a denoiser on the dataset under ``data_root``.

    Writes ``train_log.csv`` and checkpoints (``ckpt_%06d.ckpt`` every
    ``train.checkpoint_interval`` iterations, plus ``final.ckpt``) to ``out_dir``.
    """
    tcfg = settings.train
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed_everything(tcfg.seed)
    deterministic_mode(settings.deterministic)
    device = resolve_device(settings.device)

    samples = load_training_samples(data_root)
    logger.info("Loaded %d training samples from %s", len(samples), data_root)

    model = TryOnDenoiser(settings.model).to(device)
    trainer = Trainer(model, settings, samples, device=device)
    config_json = settings.model_dump_json()

    codec_mae = None
    if resume is not None:
        container = load_checkpoint(resume)
        apply_checkpoint(container, model, trainer.optimizer)
        trainer.iteration = container.iteration
        logger.info("Resumed from %s at iteration %d", resume, container.iteration)
    else:
        generator = torch.Generator().manual_seed(tcfg.seed)
        codec_mae = fit_codec(
            model.codec,
            _codec_frames(samples).to(device),
            iters=tcfg.codec_iters,
            lr=tcfg.codec_lr,
            batch_size=tcfg.codec_batch_size,
            generator=generator,
        )

    log_path = out / "train_log.csv"
    append = resume is not None and log_path.is_file()
    records: list[LossRecord] = []
    with open(log_path, "a" if append else "w", encoding="utf-8") as log:
        if not append:
            log.write(LOG_HEADER + "\n")
        while trainer.iteration < tcfg.total_iters:
            record = trainer.step()
            records.append(record)
            log.write(record.to_csv_row() + "\n")
            log.flush()
            if record.iteration % tcfg.log_every == 0:
                logger.info(
                    "iter %d [%s] ldm=%.5f tra=%.5f total=%.5f",
                    record.iteration,
                    record.phase.value,
                    record.ldm,
                    record.tra,
                    record.total,
                )
            if on_step is not None:
                on_step(record)
            done = trainer.iteration
            if tcfg.checkpoint_interval and done % tcfg.checkpoint_interval == 0:
                save_checkpoint(
                    out / f"ckpt_{done:06d}.ckpt",
                    model,
                    trainer.optimizer,
                    iteration=done,
                    config_json=config_json,
                )

    final = save_checkpoint(
        out / FINAL_CHECKPOINT,
        model,
        trainer.optimizer,
        iteration=trainer.iteration,
        config_json=config_json,
    )
    return TrainResult(final, log_path, records, codec_mae)
