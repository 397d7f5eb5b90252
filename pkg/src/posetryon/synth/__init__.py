"""Synthetic data module — articulated figures wearing procedural garments."""

from posetryon.synth.dataset import (
    load_sample,
    load_sample_dir,
    read_manifest,
    write_dataset,
)
from posetryon.synth.generator import (
    TryOnSample,
    generate_sample,
    random_scene_specs,
    swap_garment,
)

__all__ = [
    "TryOnSample",
    "generate_sample",
    "load_sample",
    "load_sample_dir",
    "random_scene_specs",
    "read_manifest",
    "swap_garment",
    "write_dataset",
]
