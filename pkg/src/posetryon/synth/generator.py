"""Deterministic renderer for synthetic try-on clips.

A stick figure with a disk head moves according to a motion profile. The
garment region is a union of convex quads and limb capsules anchored to the
skeleton, so its texture follows the body. Source and target frames share
geometry and differ only in what is painted inside that region.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from posetryon.errors import ConfigurationError
from posetryon.models import GarmentKind, MotionProfile, SceneSpec, Texture
from posetryon.pose.skeleton import GARMENT_LAYOUTS, JOINT_INDEX, NUM_JOINTS, SkeletonPose
from posetryon.utils.config import LATENT_FACTOR
from posetryon.utils.imageio import quantize

logger = logging.getLogger(__name__)

AGNOSTIC_FILL = 0.5
BASE_HEIGHT = 64.0
BASE_WIDTH = 48.0
BASE_PERIOD = 24

# Neutral pose on the 64x48 reference canvas, (x, y) per joint.
_NEUTRAL = {
    "neck": (24.0, 15.0),
    "r_shoulder": (18.0, 17.0),
    "l_shoulder": (30.0, 17.0),
    "r_elbow": (16.0, 25.0),
    "l_elbow": (32.0, 25.0),
    "r_wrist": (15.0, 32.0),
    "l_wrist": (33.0, 32.0),
    "r_hip": (20.0, 35.0),
    "l_hip": (28.0, 35.0),
    "r_knee": (19.5, 46.0),
    "l_knee": (28.5, 46.0),
    "r_ankle": (19.0, 57.0),
    "l_ankle": (29.0, 57.0),
}
_RAISED = {
    "r_elbow": (13.0, 14.0),
    "l_elbow": (35.0, 14.0),
    "r_wrist": (12.0, 5.0),
    "l_wrist": (36.0, 5.0),
}
_NEUTRAL_ARRAY = np.array([_NEUTRAL[n] for n in sorted(_NEUTRAL, key=JOINT_INDEX.get)])

_SKIN_TONES = ((0.87, 0.72, 0.6), (0.72, 0.53, 0.4), (0.55, 0.38, 0.28), (0.95, 0.8, 0.7))
_TEXTURE_CYCLE = (Texture.SOLID, Texture.STRIPES, Texture.CHECKER)


@dataclass(frozen=True)
class TryOnSample:
    """One synthetic clip with everything training and evaluation need.

    Arrays are float32 on the 8-bit grid so PNG round trips are exact.
    """

    source_video: np.ndarray
    target_video: np.ndarray
    garment_image: np.ndarray
    agnostic_video: np.ndarray
    agnostic_mask: np.ndarray
    human_pose: list[SkeletonPose]
    garment_pose: SkeletonPose
    garment_kind: GarmentKind = GarmentKind.UPPER

    @property
    def num_frames(self) -> int:
        return int(self.target_video.shape[0])

    @property
    def canvas_size(self) -> tuple[int, int]:
        return int(self.target_video.shape[-2]), int(self.target_video.shape[-1])


@dataclass(frozen=True)
class _Placement:
    scale: float
    shift_x: float
    phase0: float
    amplitude: float
    period: int
    background: np.ndarray
    skin: np.ndarray


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _placement(spec: SceneSpec) -> _Placement:
    rng = np.random.default_rng(spec.seed)
    height, width = spec.canvas_size
    scale = min(height / BASE_HEIGHT, width / BASE_WIDTH)
    return _Placement(
        scale=scale,
        shift_x=float(rng.uniform(-3.0, 3.0)),
        phase0=float(rng.uniform(0.0, 2.0 * math.pi)),
        amplitude=float(rng.uniform(0.8, 1.2)),
        period=int(round(BASE_PERIOD * max(1.0, scale))),
        background=rng.uniform(0.75, 0.95, size=3),
        skin=np.array(_SKIN_TONES[int(rng.integers(len(_SKIN_TONES)))]),
    )


def _base_joints(profile: MotionProfile, phi: float, amp: float) -> np.ndarray:
    """Joint positions on the reference canvas at motion phase ``phi``."""
    pts = _NEUTRAL_ARRAY.copy()
    s = math.sin(phi)

    def move(name: str, dx: float, dy: float = 0.0) -> None:
        pts[JOINT_INDEX[name]] += (dx, dy)

    if profile is MotionProfile.SWAY:
        pts[:, 0] += 2.5 * amp * s
        for side in ("r", "l"):
            move(f"{side}_elbow", 1.0 * amp * s)
            move(f"{side}_wrist", 1.5 * amp * s)
    elif profile is MotionProfile.WALK:
        pts[:, 1] -= 0.5 * abs(s)
        for side, sign in (("r", 1.0), ("l", -1.0)):
            lift = max(0.0, sign * s)
            move(f"{side}_knee", sign * 3.0 * amp * s, -1.5 * amp * lift)
            move(f"{side}_ankle", sign * 5.0 * amp * s, -2.0 * amp * lift)
            move(f"{side}_elbow", -sign * 1.5 * amp * s)
            move(f"{side}_wrist", -sign * 3.0 * amp * s)
    else:
        k = min(amp, 1.0) * (1.0 - math.cos(phi)) / 2.0
        for name, (rx, ry) in _RAISED.items():
            j = JOINT_INDEX[name]
            pts[j] = (1.0 - k) * pts[j] + k * np.array((rx, ry))
    return pts


def _to_canvas(base: np.ndarray, place: _Placement, size: tuple[int, int]) -> np.ndarray:
    height, width = size
    out = np.empty_like(base)
    out[:, 0] = width / 2.0 + (base[:, 0] - BASE_WIDTH / 2.0 + place.shift_x) * place.scale
    out[:, 1] = height / 2.0 + (base[:, 1] - BASE_HEIGHT / 2.0) * place.scale
    out[:, 0] = np.clip(out[:, 0], 0.0, width - 1.0)
    out[:, 1] = np.clip(out[:, 1], 0.0, height - 1.0)
    return out


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


def _capsule(grid: tuple[np.ndarray, np.ndarray], a: np.ndarray, b: np.ndarray, r: float):
    yy, xx = grid
    ab = b - a
    denom = float(ab @ ab) or 1.0
    u = np.clip(((xx - a[0]) * ab[0] + (yy - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(xx - (a[0] + u * ab[0]), yy - (a[1] + u * ab[1])) <= r


def _convex(grid: tuple[np.ndarray, np.ndarray], pts: list[np.ndarray]) -> np.ndarray:
    yy, xx = grid
    crosses = []
    for i, p in enumerate(pts):
        q = pts[(i + 1) % len(pts)]
        crosses.append((q[0] - p[0]) * (yy - p[1]) - (q[1] - p[1]) * (xx - p[0]))
    stacked = np.stack(crosses)
    return np.all(stacked >= 0, axis=0) | np.all(stacked <= 0, axis=0)


def _body_mask(grid, j: np.ndarray, s: float) -> np.ndarray:
    J = JOINT_INDEX
    neck = j[J["neck"]]
    head = neck + np.array((0.0, -6.0 * s))
    mask = np.hypot(grid[1] - head[0], grid[0] - head[1]) <= 4.5 * s
    mask |= _capsule(grid, neck, head, 1.5 * s)
    mask |= _convex(grid, [j[J["r_shoulder"]], j[J["l_shoulder"]], j[J["l_hip"]], j[J["r_hip"]]])
    for side in ("r", "l"):
        mask |= _capsule(grid, neck, j[J[f"{side}_shoulder"]], 1.8 * s)
        mask |= _capsule(grid, j[J[f"{side}_shoulder"]], j[J[f"{side}_elbow"]], 1.8 * s)
        mask |= _capsule(grid, j[J[f"{side}_elbow"]], j[J[f"{side}_wrist"]], 1.6 * s)
        mask |= _capsule(grid, j[J[f"{side}_hip"]], j[J[f"{side}_knee"]], 2.1 * s)
        mask |= _capsule(grid, j[J[f"{side}_knee"]], j[J[f"{side}_ankle"]], 1.9 * s)
    return mask


def _garment_regions(
    grid, j: np.ndarray, s: float, kind: GarmentKind
) -> tuple[np.ndarray, np.ndarray]:
    """Return (main panel, limb) masks of the garment; their union is the garment."""
    J = JOINT_INDEX
    main = np.zeros(grid[0].shape, dtype=bool)
    limbs = np.zeros_like(main)

    def off(name: str, dx: float, dy: float) -> np.ndarray:
        return j[J[name]] + np.array((dx * s, dy * s))

    if kind in (GarmentKind.UPPER, GarmentKind.DRESS):
        main |= _convex(
            grid,
            [
                off("r_shoulder", -1.0, -0.5),
                off("l_shoulder", 1.0, -0.5),
                off("l_hip", 1.0, 1.0),
                off("r_hip", -1.0, 1.0),
            ],
        )
        for side in ("r", "l"):
            main |= _capsule(grid, j[J["neck"]], j[J[f"{side}_shoulder"]], 1.8 * s)
            limbs |= _capsule(grid, j[J[f"{side}_shoulder"]], j[J[f"{side}_elbow"]], 2.4 * s)
            limbs |= _capsule(grid, j[J[f"{side}_elbow"]], j[J[f"{side}_wrist"]], 2.2 * s)
    if kind is GarmentKind.DRESS:
        main |= _convex(
            grid,
            [off("r_hip", -1.0, 0.0), off("l_hip", 1.0, 0.0), off("l_knee", 3.0, 0.0),
             off("r_knee", -3.0, 0.0)],
        )
    if kind is GarmentKind.LOWER:
        main |= _convex(
            grid,
            [off("r_hip", -1.5, -1.5), off("l_hip", 1.5, -1.5), off("l_hip", 1.5, 1.5),
             off("r_hip", -1.5, 1.5)],
        )
        for side in ("r", "l"):
            limbs |= _capsule(grid, j[J[f"{side}_hip"]], j[J[f"{side}_knee"]], 2.6 * s)
            limbs |= _capsule(grid, j[J[f"{side}_knee"]], j[J[f"{side}_ankle"]], 2.4 * s)
    limbs &= ~main
    return main, limbs


def _paint_garment(
    image: np.ndarray,
    grid,
    regions: tuple[np.ndarray, np.ndarray],
    anchor: np.ndarray,
    s: float,
    texture: Texture,
    palette: np.ndarray,
) -> None:
    """Paint texture in garment-local coordinates (relative to ``anchor``)."""
    u = np.floor((grid[1] - anchor[0]) / (2.0 * s)).astype(np.int64)
    v = np.floor((grid[0] - anchor[1]) / (2.0 * s)).astype(np.int64)
    if texture is Texture.SOLID:
        pattern = np.zeros_like(u)
    elif texture is Texture.STRIPES:
        pattern = v % 2
    else:
        pattern = (u + v) % 2
    main, limbs = regions
    main_color = np.where(pattern[None] == 0, palette[0][:, None, None], palette[1][:, None, None])
    limb_color = np.where(pattern[None] == 0, palette[2][:, None, None], palette[1][:, None, None])
    image[:] = np.where(main[None], main_color, image)
    image[:] = np.where(limbs[None], limb_color, image)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def derived_source_garment(spec: SceneSpec) -> tuple[Texture, np.ndarray]:
    """Texture and palette the figure wears in the source clip."""
    texture = _TEXTURE_CYCLE[(_TEXTURE_CYCLE.index(spec.texture) + 1) % len(_TEXTURE_CYCLE)]
    palette = 0.9 - 0.8 * np.array(spec.palette)[[1, 2, 0]]
    return texture, palette


def swap_garment(
    spec: SceneSpec,
    texture: Texture,
    palette: tuple[tuple[float, float, float], ...],
) -> SceneSpec:
    """Same figure and motion, a different query garment."""
    return spec.model_copy(update={"texture": texture, "palette": tuple(map(tuple, palette))})


def neutral_garment_pose(kind: GarmentKind, canvas_size: tuple[int, int]) -> SkeletonPose:
    """Landmarks of the flat-laid garment image."""
    place = _Placement(
        scale=min(canvas_size[0] / BASE_HEIGHT, canvas_size[1] / BASE_WIDTH),
        shift_x=0.0, phase0=0.0, amplitude=1.0, period=BASE_PERIOD,
        background=np.ones(3), skin=np.ones(3),
    )
    joints = _to_canvas(_NEUTRAL_ARRAY, place, canvas_size)
    layout = GARMENT_LAYOUTS[kind]
    return SkeletonPose(joints[list(layout)], np.ones(len(layout), dtype=np.uint8), layout)


def generate_sample(spec: SceneSpec) -> TryOnSample:
    """Render a full try-on sample; a pure function of ``spec``."""
    height, width = spec.canvas_size
    if height <= 0 or width <= 0 or height % LATENT_FACTOR or width % LATENT_FACTOR:
        raise ConfigurationError(
            f"canvas {height}x{width} must be positive and divisible by {LATENT_FACTOR}"
        )

    place = _placement(spec)
    s = place.scale
    grid = tuple(np.mgrid[0:height, 0:width].astype(np.float64))
    palette = np.array(spec.palette, dtype=np.float64)
    src_texture, src_palette = derived_source_garment(spec)
    gray = np.float32(quantize(np.array(AGNOSTIC_FILL)))

    sources, targets, agnostics, masks, poses = [], [], [], [], []
    for t in range(spec.num_frames):
        phi = place.phase0 + 2.0 * math.pi * t / place.period
        joints = _to_canvas(
            _base_joints(spec.motion_profile, phi, place.amplitude), place, (height, width)
        )
        anchor = joints[JOINT_INDEX["neck"]]

        body = np.empty((3, height, width))
        body[:] = place.background[:, None, None]
        body = np.where(_body_mask(grid, joints, s)[None], place.skin[:, None, None], body)

        regions = _garment_regions(grid, joints, s, spec.garment_kind)
        garment = regions[0] | regions[1]

        target = body.copy()
        _paint_garment(target, grid, regions, anchor, s, spec.texture, palette)
        source = body.copy()
        _paint_garment(source, grid, regions, anchor, s, src_texture, src_palette)

        target_q = quantize(target)
        mask = garment[None].astype(np.float32)
        targets.append(target_q)
        sources.append(quantize(source))
        masks.append(mask)
        agnostics.append(np.where(garment[None], gray, target_q).astype(np.float32))
        poses.append(SkeletonPose(joints, np.ones(NUM_JOINTS, dtype=np.uint8)))

    garment_pose = neutral_garment_pose(spec.garment_kind, (height, width))
    flat = np.ones((3, height, width))
    flat_joints = garment_pose.to_canonical().joints
    flat_regions = _garment_regions(grid, flat_joints, s, spec.garment_kind)
    _paint_garment(
        flat, grid, flat_regions, flat_joints[JOINT_INDEX["neck"]], s, spec.texture, palette
    )

    logger.debug("Rendered sample seed=%d frames=%d", spec.seed, spec.num_frames)
    return TryOnSample(
        source_video=np.stack(sources),
        target_video=np.stack(targets),
        garment_image=quantize(flat),
        agnostic_video=np.stack(agnostics),
        agnostic_mask=np.stack(masks),
        human_pose=poses,
        garment_pose=garment_pose,
        garment_kind=spec.garment_kind,
    )


def random_scene_specs(
    count: int,
    seed: int,
    *,
    num_frames: int = 16,
    canvas_size: tuple[int, int] = (64, 48),
) -> list[SceneSpec]:
    """Draw ``count`` varied scene specs from one seed."""
    rng = np.random.default_rng(seed)
    specs: list[SceneSpec] = []
    for _ in range(count):
        palette = np.round(rng.uniform(0.05, 0.95, size=(3, 3)), 3)
        specs.append(
            SceneSpec(
                seed=int(rng.integers(0, 2**31 - 1)),
                num_frames=num_frames,
                canvas_size=canvas_size,
                motion_profile=list(MotionProfile)[int(rng.integers(len(MotionProfile)))],
                garment_kind=list(GarmentKind)[int(rng.integers(len(GarmentKind)))],
                texture=list(Texture)[int(rng.integers(len(Texture)))],
                palette=tuple(tuple(float(c) for c in row) for row in palette),
            )
        )
    return specs
