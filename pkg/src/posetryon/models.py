"""Shared Pydantic data models for PoseTryOn."""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, Field, field_validator


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class MotionProfile(str, Enum):
    """How the synthetic figure moves over time."""

    SWAY = "sway"
    WALK = "walk"
    RAISE_ARMS = "raise-arms"


class GarmentKind(str, Enum):
    """Which part of the body the garment covers."""

    UPPER = "upper"
    LOWER = "lower"
    DRESS = "dress"


class Texture(str, Enum):
    """Procedural garment texture."""

    SOLID = "solid"
    STRIPES = "stripes"
    CHECKER = "checker"


class Phase(str, Enum):
    """Training phase of a single optimizer step."""

    IMAGE = "image"
    VIDEO = "video"


class TrainMode(str, Enum):
    """Joint image/video alternation or image-only training."""

    JOINT = "joint"
    IMAGE = "image"


class Split(str, Enum):
    """Dataset split a sample belongs to."""

    TRAIN = "train"
    TEST = "test"


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------

RGB = tuple[float, float, float]


class SceneSpec(BaseModel):
    """Everything needed to render one synthetic try-on clip."""

    seed: int = Field(description="Seed for motion phase, amplitude and placement")
    num_frames: int = Field(ge=1, description="Number of frames T")
    canvas_size: tuple[int, int] = Field(default=(64, 48), description="(height, width) in pixels")
    motion_profile: MotionProfile = Field(default=MotionProfile.SWAY)
    garment_kind: GarmentKind = Field(default=GarmentKind.UPPER)
    texture: Texture = Field(default=Texture.STRIPES)
    palette: tuple[RGB, RGB, RGB] = Field(
        default=((0.8, 0.2, 0.2), (0.95, 0.9, 0.3), (0.2, 0.3, 0.7)),
        description="Three RGB colors in [0, 1]",
    )

    @field_validator("palette")
    @classmethod
    def _colors_in_range(cls, value: tuple[RGB, RGB, RGB]) -> tuple[RGB, RGB, RGB]:
        for color in value:
            if any(not 0.0 <= c <= 1.0 for c in color):
                raise ValueError(f"palette color out of [0, 1]: {color}")
        return value


class ManifestEntry(BaseModel):
    """One line of a dataset manifest."""

    sample_dir: str = Field(description="Sample directory relative to the dataset root")
    garment_kind: GarmentKind
    num_frames: int = Field(ge=1)
    split: Split = Field(default=Split.TRAIN)

    def to_line(self) -> str:
        return f"{self.sample_dir} {self.garment_kind.value} {self.num_frames} {self.split.value}"


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------


class LossRecord(BaseModel):
    """Loss components of one training step."""

    iteration: int
    phase: Phase
    ldm: float
    tra: float
    total: float

    def to_csv_row(self) -> str:
        return f"{self.iteration},{self.phase.value},{self.ldm:.8g},{self.tra:.8g},{self.total:.8g}"


class EvalRow(BaseModel):
    """Per-sample evaluation metrics."""

    sample_id: str
    ssim: float
    flicker_raw: float
    flicker_excess: float
    tra_stat: float

    def to_csv_row(self) -> str:
        return (
            f"{self.sample_id},{self.ssim:.6f},{self.flicker_raw:.6f},"
            f"{self.flicker_excess:.6f},{self.tra_stat:.8g}"
        )
