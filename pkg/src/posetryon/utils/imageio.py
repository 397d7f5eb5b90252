"""PNG reading/writing and contact sheets via Pillow."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

_SCALE = np.float32(255)


def quantize(image: np.ndarray) -> np.ndarray:
    """Snap values in [0, 1] to the 8-bit grid, matching what ``load_png`` returns."""
    levels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.float32)
    return levels / _SCALE


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Convert a CHW (or HW) float array in [0, 1] to an HWC/HW uint8 array."""
    arr = np.asarray(image)
    if arr.ndim == 3:
        arr = arr[0] if arr.shape[0] == 1 else np.transpose(arr, (1, 2, 0))
    return np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(image: np.ndarray, path: str | Path) -> Path:
    """Write a CHW float image (3 or 1 channels) as PNG."""
    target = Path(path)
    Image.fromarray(to_uint8(image)).save(target, format="PNG")
    return target


def load_png(path: str | Path, *, channels: int = 3) -> np.ndarray:
    """Read a PNG as a float32 CHW array in [0, 1]."""
    mode = "RGB" if channels == 3 else "L"
    with Image.open(path) as img:
        arr = np.asarray(img.convert(mode), dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = np.transpose(arr, (2, 0, 1))
    return arr.astype(np.float32) / _SCALE


def contact_sheet(rows: list[list[np.ndarray]], path: str | Path, *, gap: int = 2) -> Path:
    """Tile rows of CHW images into one PNG with a white gutter."""
    if not rows or not rows[0]:
        raise ValueError("contact sheet needs at least one image")
    h, w = rows[0][0].shape[-2:]
    n_cols = max(len(r) for r in rows)
    sheet = Image.new(
        "RGB", (n_cols * (w + gap) + gap, len(rows) * (h + gap) + gap), (255, 255, 255)
    )
    for r, row in enumerate(rows):
        for c, image in enumerate(row):
            tile = Image.fromarray(to_uint8(image)).convert("RGB")
            sheet.paste(tile, (gap + c * (w + gap), gap + r * (h + gap)))
    target = Path(path)
    sheet.save(target, format="PNG")
    return target
