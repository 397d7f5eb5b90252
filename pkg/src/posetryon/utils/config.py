"""Configuration management for PoseTryOn."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from posetryon.errors import ConfigurationError
from posetryon.models import TrainMode

_CONFIG_FILENAME = "posetryon.toml"
_TABLE_NAME = "posetryon"

ENV_VARS: dict[str, str] = {
    "POSETRYON_LOG_LEVEL": "log_level",
    "DPIDM_DETERMINISTIC": "deterministic",
    "POSETRYON_DETERMINISTIC": "deterministic",
    "POSETRYON_DEVICE": "device",
}

LATENT_FACTOR = 4
"""Spatial downsample factor of the latent codec and the pose encoder."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DataSettings(_Section):
    """Synthetic canvas and clip geometry."""

    canvas_height: int = Field(default=64, gt=0, description="Frame height in pixels")
    canvas_width: int = Field(default=48, gt=0, description="Frame width in pixels")
    num_frames: int = Field(default=16, ge=1, description="Frames per generated clip")

    @model_validator(mode="after")
    def _divisible(self) -> "DataSettings":
        if self.canvas_height % LATENT_FACTOR or self.canvas_width % LATENT_FACTOR:
            raise ValueError(
                f"canvas {self.canvas_height}x{self.canvas_width} must be divisible by "
                f"{LATENT_FACTOR}"
            )
        return self

    @property
    def latent_size(self) -> tuple[int, int]:
        return self.canvas_height // LATENT_FACTOR, self.canvas_width // LATENT_FACTOR


class ModelSettings(_Section):
    """Denoiser architecture."""

    widths: list[int] = Field(default=[32, 64, 128], description="Channel width per U-Net stage")
    garment_widths: list[int] | None = Field(
        default=None, description="Garment U-Net widths; defaults to the main U-Net widths"
    )
    attention_stages: list[int] = Field(
        default=[1, 2], description="Stage indices carrying hierarchical attention"
    )
    heads: int = Field(default=4, ge=1)
    pose_dim: int = Field(default=16, ge=1, description="Pose embedding channels d_p")
    pose_encoder_widths: list[int] = Field(default=[16, 32, 64])
    adapter_ratio: int = Field(default=4, ge=1, description="Pose adapter bottleneck ratio")
    shift_frames: int = Field(default=1, ge=0, description="Frames L borrowed by TSA")
    context_dim: int = Field(default=64, ge=1, description="Garment embedding width d_c")
    context_grid: int = Field(default=2, ge=1, description="Garment tokens per side")
    codec_width: int = Field(default=32, ge=1)
    tra_layers: int = Field(default=2, ge=1, description="Decoder attention blocks used by TRA")
    use_pose_adapters: bool = True
    use_temporal_shift: bool = True

    @model_validator(mode="after")
    def _consistent(self) -> "ModelSettings":
        if not self.widths:
            raise ValueError("widths must not be empty")
        bad = [s for s in self.attention_stages if not 0 <= s < len(self.widths)]
        if bad:
            raise ValueError(f"attention_stages out of range: {bad}")
        for s in self.attention_stages:
            if self.widths[s] % self.heads:
                raise ValueError(f"width {self.widths[s]} not divisible by heads {self.heads}")
        if len(self.pose_encoder_widths) != 3:
            raise ValueError("pose_encoder_widths needs exactly three entries")
        return self


class DiffusionSettings(_Section):
    """Noise schedule."""

    num_steps: int = Field(default=1000, ge=1, description="Training timesteps N_t")
    beta_start: float = Field(default=1e-4, gt=0.0, lt=1.0)
    beta_end: float = Field(default=0.02, gt=0.0, lt=1.0)


class TrainSettings(_Section):
    """Joint image/video training loop."""

    mode: TrainMode = TrainMode.JOINT
    batch_size: int = Field(default=4, ge=1)
    clip_length: int = Field(default=8, ge=2, description="Frames T per video-phase clip")
    learning_rate: float = Field(default=2e-4, gt=0.0)
    total_iters: int = Field(default=2000, ge=0)
    lambda_video: float = Field(default=1e-3, ge=0.0)
    lambda_image: float = Field(default=0.0, ge=0.0)
    keypoint_drop_prob: float = Field(default=0.05, ge=0.0, le=1.0)
    garment_cond_drop_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    flip_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0
    checkpoint_interval: int = Field(default=500, ge=0)
    log_every: int = Field(default=50, ge=1)
    codec_iters: int = Field(default=400, ge=0)
    codec_lr: float = Field(default=2e-3, gt=0.0)
    codec_batch_size: int = Field(default=32, ge=1)


class SampleSettings(_Section):
    """Sliding-window inference."""

    window: int | None = Field(default=None, ge=1, description="Defaults to train.clip_length")
    stride: int | None = Field(default=None, ge=1, description="Defaults to half the window")
    steps: int = Field(default=25, ge=1)
    guidance: float = Field(default=1.5, ge=0.0)
    seed: int = 0


class Settings(BaseModel):
    """Application-wide settings loaded from environment and/or config file.

    Resolution order (highest priority first):
    1. Explicit overrides (CLI flags)
    2. Environment variables
    3. ``posetryon.toml`` (or an explicit ``--config`` file)
    4. Defaults defined here
    """

    model_config = ConfigDict(extra="forbid")

    log_level: str = Field(default="WARNING", description="Logging level")
    deterministic: bool = Field(default=False, description="Force deterministic torch kernels")
    device: str = Field(default="cpu", description="Torch device")
    data: DataSettings = Field(default_factory=DataSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    diffusion: DiffusionSettings = Field(default_factory=DiffusionSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)
    sample: SampleSettings = Field(default_factory=SampleSettings)

    # ----- class methods ----

    @classmethod
    def load(
        cls,
        overrides: dict[str, Any] | None = None,
        *,
        config_file: str | Path | None = None,
        base_path: str | Path | None = None,
    ) -> "Settings":
        """Build a ``Settings`` instance honouring env vars and config files.

        Args:
            overrides: Explicit overrides, nested or with dotted keys.
            config_file: Explicit config file; must exist when given.
            base_path: Directory searched for ``posetryon.toml`` when no file is given.

        Returns:
            A fully resolved ``Settings`` object.

        Raises:
            ConfigurationError: On unreadable files, unknown keys or invalid values.
        """
        values: dict[str, Any] = {}

        if config_file is not None:
            path = Path(config_file)
            if not path.is_file():
                raise ConfigurationError(f"Config file not found: {path}")
            _merge(values, _parse_toml(path))
        else:
            local = config_path(base_path)
            if local.is_file():
                _merge(values, _parse_toml(local))

        for env_key, field_name in ENV_VARS.items():
            env_val = os.environ.get(env_key)
            if env_val is not None:
                values[field_name] = env_val

        if overrides:
            _merge(values, _expand_dotted(overrides))

        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "Settings":
        """Validate a nested dict, mapping pydantic errors to ``ConfigurationError``."""
        try:
            return cls.model_validate(values)
        except ValidationError as exc:
            err = exc.errors()[0]
            key = ".".join(str(part) for part in err["loc"]) or "<root>"
            raise ConfigurationError(f"Invalid configuration key '{key}': {err['msg']}") from exc

    def to_dotted(self) -> dict[str, Any]:
        """Flatten to ``{"train.batch_size": 4, ...}`` in declaration order."""
        return _flatten(self.model_dump(mode="json"))

    def resolved_window(self) -> int:
        return self.sample.window or self.train.clip_length

    def resolved_stride(self) -> int:
        window = self.resolved_window()
        return self.sample.stride or max(1, window // 2)


def config_path(base_path: str | Path | None = None) -> Path:
    """Return the path to the config file for the given directory (or cwd)."""
    base = Path(base_path).resolve() if base_path else Path.cwd()
    return base / _CONFIG_FILENAME


def write_config(settings: Settings, path: str | Path | None = None) -> Path:
    """Write settings as dotted ``key = value`` lines.

    Keys whose value is ``None`` are omitted so the file stays loadable.

    Returns:
        The path that was written.
    """
    target = Path(path) if path else config_path()
    target.parent.mkdir(parents=True, exist_ok=True)

    lines = ["# PoseTryOn configuration"]
    for key, value in settings.to_dotted().items():
        if value is None:
            continue
        lines.append(f"{key} = {_toml_value(value)}")
    lines.append("")

    target.write_text("\n".join(lines), encoding="utf-8")
    return target


def setting_sources(
    overrides: dict[str, Any] | None = None,
    *,
    config_file: str | Path | None = None,
    base_path: str | Path | None = None,
) -> dict[str, str]:
    """Name the layer that supplied each non-default dotted key."""
    sources: dict[str, str] = {}
    path = Path(config_file) if config_file else config_path(base_path)
    if path.is_file():
        for key in _flatten(_expand_dotted(_parse_toml(path))):
            sources[key] = f"file ({path.name})"
    for env_key, field_name in ENV_VARS.items():
        if os.environ.get(env_key) is not None:
            sources[field_name] = f"env ({env_key})"
    for key in _flatten(_expand_dotted(overrides or {})):
        sources[key] = "override"
    return sources


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(value)


def _flatten(data: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, f"{name}."))
        else:
            out[name] = value
    return out


def _expand_dotted(flat: dict[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        if isinstance(value, dict):
            node.setdefault(parts[-1], {})
            _merge(node[parts[-1]], _expand_dotted(value))
        else:
            node[parts[-1]] = value
    return nested


def _merge(into: dict[str, Any], other: dict[str, Any]) -> None:
    for key, value in other.items():
        if isinstance(value, dict) and isinstance(into.get(key), dict):
            _merge(into[key], value)
        else:
            into[key] = value


def _parse_toml(path: Path) -> dict[str, Any]:
    """Parse a TOML config file into a nested dict.

    Uses the stdlib ``tomllib`` (Python ≥ 3.11) with a fallback to
    ``tomli`` for 3.10.
    """
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib  # type: ignore[no-redef]

    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"Malformed config file {path}: {exc}") from exc

    # Support a top-level [posetryon] table or flat keys
    return dict(data.get(_TABLE_NAME, data))
