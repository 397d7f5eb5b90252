"""Binary checkpoint container.

Layout (little-endian)::

    magic        8 bytes  b"PTRYCKPT"
    version      uint32
    iteration    uint64
    config       uint32 length + UTF-8 JSON
    params       uint32 count, then entries
    optimizer    uint32 count, then entries

    entry        uint16 name length, UTF-8 name, uint8 ndim,
                 uint32 x ndim dims, float32 x prod(dims) data

Optimizer entries are named ``adam.<param>.exp_avg``, ``adam.<param>.exp_avg_sq``
and ``adam.<param>.step``.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from posetryon.errors import PoseTryOnError

logger = logging.getLogger(__name__)

MAGIC = b"PTRYCKPT"
FORMAT_VERSION = 1
_ADAM_FIELDS = ("exp_avg", "exp_avg_sq", "step")


class CheckpointFormatError(PoseTryOnError):
    """Raised when a checkpoint file is truncated, corrupt or of an unknown version."""


class CheckpointMismatchError(PoseTryOnError):
    """Raised when a checkpoint does not fit the model it is loaded into."""


@dataclass
class CheckpointContainer:
    """Parsed checkpoint contents."""

    iteration: int = 0
    config_json: str = "{}"
    params: dict[str, np.ndarray] = field(default_factory=dict)
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = FORMAT_VERSION

    @property
    def config(self) -> dict:
        return json.loads(self.config_json)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def _pack_entry(name: str, array: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    data = np.ascontiguousarray(array, dtype="<f4")
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<B", data.ndim)
    head += struct.pack(f"<{data.ndim}I", *data.shape)
    return head + data.tobytes()


def encode_container(container: CheckpointContainer) -> bytes:
    config = container.config_json.encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<IQI", container.version, container.iteration, len(config)),
        config,
        struct.pack("<I", len(container.params)),
        *(_pack_entry(n, a) for n, a in container.params.items()),
        struct.pack("<I", len(container.optimizer)),
        *(_pack_entry(n, a) for n, a in container.optimizer.items()),
    ]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, source: str) -> None:
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(
                f"{self.source}: truncated at byte {self.pos} (needed {n} more bytes)"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def entry(self) -> tuple[str, np.ndarray]:
        (name_len,) = self.unpack("<H")
        try:
            name = self.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError(f"{self.source}: corrupt entry name") from exc
        (ndim,) = self.unpack("<B")
        dims = self.unpack(f"<{ndim}I") if ndim else ()
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        array = np.frombuffer(self.take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
        return name, array


def decode_container(data: bytes, source: str = "<bytes>") -> CheckpointContainer:
    """Parse a whole checkpoint; raises ``CheckpointFormatError`` on any defect."""
    reader = _Reader(data, source)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError(f"{source}: bad magic, not a PoseTryOn checkpoint")
    version, iteration, config_len = reader.unpack("<IQI")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{source}: unsupported format version {version}")
    try:
        config_json = reader.take(config_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CheckpointFormatError(f"{source}: config snapshot is not UTF-8") from exc

    (n_params,) = reader.unpack("<I")
    params = dict(reader.entry() for _ in range(n_params))
    (n_opt,) = reader.unpack("<I")
    optimizer = dict(reader.entry() for _ in range(n_opt))
    if reader.pos != len(data):
        raise CheckpointFormatError(f"{source}: {len(data) - reader.pos} trailing bytes")
    return CheckpointContainer(iteration, config_json, params, optimizer, version)


# ---------------------------------------------------------------------------
# Model <-> container
# ---------------------------------------------------------------------------


def container_from_model(
    model: nn.Module,
    optimizer: torch.optim.Optimizer | None = None,
    *,
    iteration: int = 0,
    config_json: str = "{}",
) -> CheckpointContainer:
    params = {
        name: tensor.detach().cpu().to(torch.float32).numpy().copy()
        for name, tensor in model.state_dict().items()
    }
    opt_state: dict[str, np.ndarray] = {}
    if optimizer is not None:
        for name, param in model.named_parameters():
            state = optimizer.state.get(param)
            if not state:
                continue
            for key in _ADAM_FIELDS:
                value = torch.as_tensor(state[key]).detach().cpu().to(torch.float32)
                opt_state[f"adam.{name}.{key}"] = value.numpy().copy()
    return CheckpointContainer(iteration, config_json, params, opt_state)


def save_checkpoint(
    path: str | Path,
    model: nn.Module,
    optimizer: torch.optim.Optimizer | None = None,
    *,
    iteration: int = 0,
    config_json: str = "{}",
) -> Path:
    """Write a checkpoint atomically (temp file, then rename)."""
    container = container_from_model(model, optimizer, iteration=iteration, config_json=config_json)
    return write_container(path, container)


def write_container(path: str | Path, container: CheckpointContainer) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(encode_container(container))
    os.replace(tmp, target)
    logger.info("Saved checkpoint %s (iteration %d)", target, container.iteration)
    return target


def load_checkpoint(path: str | Path) -> CheckpointContainer:
    """Read and fully parse a checkpoint file."""
    source = Path(path)
    try:
        data = source.read_bytes()
    except OSError as exc:
        raise CheckpointFormatError(f"Cannot read checkpoint {source}: {exc}") from exc
    return decode_container(data, str(source))


def apply_checkpoint(
    container: CheckpointContainer,
    model: nn.Module,
    optimizer: torch.optim.Optimizer | None = None,
) -> None:
    """Load parameters (and optimizer state) after validating every entry.

    Raises:
        CheckpointMismatchError: Missing or unexpected names, or the first entry
            whose shape differs from the model's.
    """
    state = model.state_dict()
    missing = [n for n in state if n not in container.params]
    unexpected = [n for n in container.params if n not in state]
    if missing:
        raise CheckpointMismatchError(f"checkpoint is missing parameters: {', '.join(missing)}")
    if unexpected:
        raise CheckpointMismatchError(f"checkpoint has unknown parameters: {', '.join(unexpected)}")
    for name, tensor in state.items():
        got = tuple(container.params[name].shape)
        if got != tuple(tensor.shape):
            raise CheckpointMismatchError(
                f"parameter '{name}' has shape {list(got)} in checkpoint, "
                f"model expects {list(tensor.shape)}"
            )

    restored: dict[nn.Parameter, dict[str, torch.Tensor]] = {}
    if optimizer is not None and container.optimizer:
        for name, param in model.named_parameters():
            keys = [f"adam.{name}.{k}" for k in _ADAM_FIELDS]
            if not all(k in container.optimizer for k in keys):
                continue
            avg, avg_sq, step = (container.optimizer[k] for k in keys)
            if avg.shape != tuple(param.shape) or avg_sq.shape != tuple(param.shape):
                raise CheckpointMismatchError(f"optimizer state for '{name}' has the wrong shape")
            restored[param] = {
                "step": torch.tensor(float(step)),
                "exp_avg": torch.from_numpy(avg.copy()).to(param),
                "exp_avg_sq": torch.from_numpy(avg_sq.copy()).to(param),
            }

    model.load_state_dict(
        {n: torch.from_numpy(a.copy()).to(state[n]) for n, a in container.params.items()}
    )
    for param, values in restored.items():
        optimizer.state[param] = values  # type: ignore[union-attr]
