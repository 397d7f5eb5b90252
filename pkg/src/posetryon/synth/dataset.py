"""On-disk dataset layout: PNG frames, ``poses.txt`` and a text manifest."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from posetryon.errors import DataError
from posetryon.models import GarmentKind, ManifestEntry, SceneSpec, Split
from posetryon.pose.skeleton import GARMENT_LAYOUTS, HUMAN_LAYOUT, SkeletonPose
from posetryon.synth.generator import TryOnSample, generate_sample
from posetryon.utils.imageio import load_png, save_png

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
POSES_NAME = "poses.txt"
GARMENT_FRAME = -1
_MANIFEST_HEADER = "# sample_dir garment_kind num_frames split"


def manifest_path(root: str | Path) -> Path:
    """Accept either the dataset root or the manifest file itself."""
    path = Path(root)
    return path if path.is_file() else path / MANIFEST_NAME


def write_dataset(
    specs: list[SceneSpec], root: str | Path, *, test_count: int = 0
) -> list[ManifestEntry]:
    """Render every spec under ``root`` and write the manifest.

    The last ``test_count`` samples are marked ``test``.

    Raises:
        OSError: If ``root`` cannot be written; the message names the path.
    """
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Cannot create dataset directory {root}: {exc}") from exc

    entries: list[ManifestEntry] = []
    first_test = len(specs) - max(0, test_count)
    for i, spec in enumerate(specs):
        sample_id = f"sample_{i:04d}"
        try:
            write_sample(generate_sample(spec), root / sample_id, spec=spec)
        except OSError as exc:
            raise OSError(f"Cannot write sample {root / sample_id}: {exc}") from exc
        entries.append(
            ManifestEntry(
                sample_dir=sample_id,
                garment_kind=spec.garment_kind,
                num_frames=spec.num_frames,
                split=Split.TEST if i >= first_test else Split.TRAIN,
            )
        )

    lines = [_MANIFEST_HEADER, *(e.to_line() for e in entries)]
    try:
        (root / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Cannot write manifest {root / MANIFEST_NAME}: {exc}") from exc
    logger.info("Wrote %d samples to %s", len(entries), root)
    return entries


def write_sample(sample: TryOnSample, directory: Path, *, spec: SceneSpec | None = None) -> None:
    """Write one sample directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for t in range(sample.num_frames):
        save_png(sample.source_video[t], directory / f"source_{t:04d}.png")
        save_png(sample.target_video[t], directory / f"target_{t:04d}.png")
        save_png(sample.agnostic_video[t], directory / f"agnostic_{t:04d}.png")
        save_png(sample.agnostic_mask[t], directory / f"mask_{t:04d}.png")
    save_png(sample.garment_image, directory / "garment.png")
    (directory / POSES_NAME).write_text(
        format_poses(sample.human_pose, sample.garment_pose), encoding="utf-8"
    )
    if spec is not None:
        (directory / "scene.json").write_text(spec.model_dump_json(indent=2), encoding="utf-8")


def format_poses(human: list[SkeletonPose], garment: SkeletonPose) -> str:
    """``frame_idx joint_idx x y present`` lines; garment landmarks use frame -1."""
    lines: list[str] = []
    for t, pose in enumerate(human):
        for j in range(pose.joint_count):
            x, y = pose.joints[j]
            lines.append(f"{t} {j} {float(x)!r} {float(y)!r} {int(pose.present[j])}")
    for j in range(garment.joint_count):
        x, y = garment.joints[j]
        lines.append(f"{GARMENT_FRAME} {j} {float(x)!r} {float(y)!r} {int(garment.present[j])}")
    return "\n".join(lines) + "\n"


def parse_poses(
    text: str, kind: GarmentKind, source: str = POSES_NAME
) -> tuple[list[SkeletonPose], SkeletonPose]:
    """Inverse of :func:`format_poses`."""
    frames: dict[int, dict[int, tuple[float, float, int]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise DataError(f"{source}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            frame, joint = int(parts[0]), int(parts[1])
            values = (float(parts[2]), float(parts[3]), int(parts[4]))
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from exc
        frames.setdefault(frame, {})[joint] = values

    def build(rows: dict[int, tuple[float, float, int]], layout: tuple[int, ...]) -> SkeletonPose:
        if sorted(rows) != list(range(len(layout))):
            raise DataError(f"{source}: expected joints 0..{len(layout) - 1}, got {sorted(rows)}")
        ordered = [rows[j] for j in range(len(layout))]
        return SkeletonPose(
            np.array([(x, y) for x, y, _ in ordered]),
            np.array([p for _, _, p in ordered], dtype=np.uint8),
            layout,
        )

    if GARMENT_FRAME not in frames:
        raise DataError(f"{source}: missing garment landmarks (frame {GARMENT_FRAME})")
    garment = build(frames.pop(GARMENT_FRAME), GARMENT_LAYOUTS[kind])
    if sorted(frames) != list(range(len(frames))):
        raise DataError(f"{source}: frame indices are not contiguous from 0")
    human = [build(frames[t], HUMAN_LAYOUT) for t in range(len(frames))]
    return human, garment


def read_manifest(root: str | Path) -> list[ManifestEntry]:
    """Parse ``manifest.txt``; ``#`` lines are comments."""
    path = manifest_path(root)
    if not path.is_file():
        raise DataError(f"Manifest not found: {path}")
    entries: list[ManifestEntry] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise DataError(f"{path}:{lineno}: malformed manifest line {line!r}")
        try:
            entries.append(
                ManifestEntry(
                    sample_dir=parts[0],
                    garment_kind=GarmentKind(parts[1]),
                    num_frames=int(parts[2]),
                    split=Split(parts[3]) if len(parts) == 4 else Split.TRAIN,
                )
            )
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return entries


def load_sample(root: str | Path, entry: ManifestEntry) -> TryOnSample:
    """Read one sample back into memory, bit-identical to what was written."""
    directory = manifest_path(root).parent / entry.sample_dir
    if not directory.is_dir():
        raise DataError(f"Sample directory not found: {directory}")
    return load_sample_dir(directory, entry.garment_kind, entry.num_frames)


def load_sample_dir(
    directory: str | Path, kind: GarmentKind, num_frames: int | None = None
) -> TryOnSample:
    """Read a sample directory directly (used by ``posetryon sample``)."""
    directory = Path(directory)
    poses_file = directory / POSES_NAME
    if not poses_file.is_file():
        raise DataError(f"Missing {poses_file}")
    human, garment_pose = parse_poses(
        poses_file.read_text(encoding="utf-8"), kind, source=str(poses_file)
    )
    n = num_frames if num_frames is not None else len(human)
    if len(human) != n:
        raise DataError(f"{poses_file}: {len(human)} frames, manifest says {n}")
    try:
        frames = {
            name: np.stack(
                [load_png(directory / f"{name}_{t:04d}.png", channels=1 if name == "mask" else 3)
                 for t in range(n)]
            )
            for name in ("source", "target", "agnostic", "mask")
        }
        garment_image = load_png(directory / "garment.png")
    except FileNotFoundError as exc:
        raise DataError(f"Missing frame in {directory}: {exc.filename}") from exc
    return TryOnSample(
        source_video=frames["source"],
        target_video=frames["target"],
        garment_image=garment_image,
        agnostic_video=frames["agnostic"],
        agnostic_mask=frames["mask"],
        human_pose=human,
        garment_pose=garment_pose,
        garment_kind=kind,
    )


def read_scene_spec(directory: str | Path) -> SceneSpec | None:
    """Scene spec stored next to a sample, if any."""
    path = Path(directory) / "scene.json"
    if not path.is_file():
        return None
    return SceneSpec.model_validate_json(path.read_text(encoding="utf-8"))


def infer_garment_kind(directory: str | Path) -> GarmentKind:
    """Garment kind of a standalone sample directory, from its scene or landmark count."""
    spec = read_scene_spec(directory)
    if spec is not None:
        return spec.garment_kind
    poses_file = Path(directory) / POSES_NAME
    if not poses_file.is_file():
        raise DataError(f"Missing {poses_file}")
    count = sum(
        1 for line in poses_file.read_text(encoding="utf-8").splitlines()
        if line.split()[:1] == [str(GARMENT_FRAME)]
    )
    for kind, layout in GARMENT_LAYOUTS.items():
        if len(layout) == count:
            return kind
    raise DataError(f"{poses_file}: {count} garment landmarks match no garment kind")
