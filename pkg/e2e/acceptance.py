"""Acceptance runs at smoke scale: convergence, the TRA trend and visual sanity.

These take minutes, not seconds, so they live outside the pytest suite.
Run with ``python e2e/acceptance.py [workdir]``.
"""

import sys
import tempfile
from pathlib import Path

# Force UTF-8 output
sys.stdout.reconfigure(encoding="utf-8", errors="replace")

import numpy as np
import torch

from posetryon.inference import TryOnPipeline, restore_denoiser
from posetryon.metrics import evaluate_dataset, summarize, video_ssim
from posetryon.network.codec import reconstruction_mae
from posetryon.network.denoiser import TryOnDenoiser
from posetryon.synth.dataset import load_sample, read_manifest, write_dataset
from posetryon.synth.generator import generate_sample, random_scene_specs, swap_garment
from posetryon.training import train
from posetryon.training.trainer import load_training_samples
from posetryon.utils.config import Settings
from posetryon.utils.runtime import seed_everything

SAMPLES = 16
HELD_OUT = 4
CANVAS = (32, 24)


def smoke_settings(**train_overrides) -> Settings:
    return Settings.from_dict(
        {
            "data": {"canvas_height": CANVAS[0], "canvas_width": CANVAS[1], "num_frames": 8},
            "model": {
                "widths": [16, 32],
                "attention_stages": [0, 1],
                "heads": 2,
                "pose_dim": 8,
                "pose_encoder_widths": [8, 16, 16],
                "context_dim": 16,
                "codec_width": 16,
            },
            "train": {
                "batch_size": 4,
                "clip_length": 4,
                "total_iters": 2000,
                "checkpoint_interval": 0,
                "log_every": 200,
                **train_overrides,
            },
            "sample": {"steps": 10},
        }
    )


def banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def make_dataset(root: Path) -> Path:
    specs = random_scene_specs(SAMPLES + HELD_OUT, 11, num_frames=8, canvas_size=CANVAS)
    write_dataset(specs, root, test_count=HELD_OUT)
    return root


def test_smoke_convergence(data: Path, work: Path) -> Path:
    """Test 1: 2000 joint iterations halve the trailing loss."""
    banner("TEST 1: Smoke convergence")

    result = train(data, smoke_settings(), work / "smoke")
    totals = np.array([r.total for r in result.records])
    head, tail = totals[:50].mean(), totals[-50:].mean()
    print(f"Leading mean: {head:.5f}  trailing mean: {tail:.5f}")
    assert tail <= 0.5 * head, "loss did not halve"

    print(f"Codec MAE after pre-training: {result.codec_mae:.4f}")
    assert result.codec_mae is not None and result.codec_mae <= 0.05, "codec too lossy"

    model, _ = restore_denoiser(result.checkpoint)
    held_out = torch.from_numpy(
        np.concatenate([load_sample(data, e).target_video for e in read_manifest(data)[-HELD_OUT:]])
    )
    mae = reconstruction_mae(model.codec, held_out)
    print(f"Codec MAE on held-out frames: {mae:.4f}")
    assert mae <= 0.05, "codec too lossy on held-out frames"
    print("PASS\n")
    return result.checkpoint


def test_tra_trend(data: Path, work: Path) -> None:
    """Test 2: the temporal regularizer lowers the held-out attention variation."""
    banner("TEST 2: TRA efficacy over 3 seed pairs")

    wins = 0
    flicker = {"on": [], "off": []}
    for seed in range(3):
        stats = {}
        for label, lam in (("on", 1e-3), ("off", 0.0)):
            settings = smoke_settings(seed=seed, lambda_video=lam)
            result = train(data, settings, work / f"tra_{label}_{seed}")
            model, _ = restore_denoiser(result.checkpoint)
            summary = summarize(evaluate_dataset(data, model, settings, seed=seed))
            stats[label] = summary["tra_stat"]
            flicker[label].append(summary["flicker_excess"])
        print(f"seed {seed}: tra on={stats['on']:.6f} off={stats['off']:.6f}")
        wins += stats["on"] < stats["off"]

    on, off = np.mean(flicker["on"]), np.mean(flicker["off"])
    print(f"Mean flicker excess: on={on:.5f} off={off:.5f}")
    assert wins == 3, f"regularized twin lower in only {wins}/3 seeds"
    assert on <= off, "regularized twins flicker more"
    print("PASS\n")


def test_swapped_garment(data: Path, checkpoint: Path) -> None:
    """Test 3: a trained model beats an untrained one on a garment swap."""
    banner("TEST 3: Swapped-garment visual sanity")

    model, settings = restore_denoiser(checkpoint)
    seed_everything(123)
    untrained = TryOnDenoiser(settings.model).eval()
    untrained.codec.load_state_dict(model.codec.state_dict())

    specs = random_scene_specs(SAMPLES + HELD_OUT, 11, num_frames=8, canvas_size=CANVAS)
    held_out, donor = specs[-1], specs[0]
    sample = generate_sample(swap_garment(held_out, donor.texture, donor.palette))

    window = settings.resolved_window()
    scores = {}
    for label, net in (("trained", model), ("untrained", untrained)):
        result = TryOnPipeline.from_settings(net, settings).run(
            sample,
            window=window,
            stride=settings.resolved_stride(),
            steps=settings.sample.steps,
            guidance=settings.sample.guidance,
        )
        scores[label] = video_ssim(result.composited, sample.target_video, sample.agnostic_mask)
        print(f"{label}: masked SSIM {scores[label]:.4f}")

    assert scores["trained"] >= scores["untrained"] + 0.05, "no visible gain from training"
    print("PASS\n")


def main() -> None:
    print("PoseTryOn acceptance runs")
    print("=" * 60)

    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="posetryon-"))
    data = make_dataset(work / "data")
    print(f"Dataset: {data} ({len(load_training_samples(data))} training samples)\n")

    checkpoint = test_smoke_convergence(data, work)
    test_swapped_garment(data, checkpoint)
    test_tra_trend(data, work)

    print("=" * 60)
    print("ALL ACCEPTANCE RUNS PASSED!")
    print("=" * 60)


if __name__ == "__main__":
    main()
