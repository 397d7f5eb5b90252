"""Training module — batches, the joint training loop and checkpoints."""

from posetryon.training.batches import (
    BatchPolicy,
    TrainingBatch,
    encode_batch,
    encode_conditions,
    make_batch,
    sample_batch,
)
from posetryon.training.checkpoint import (
    CheckpointContainer,
    CheckpointFormatError,
    CheckpointMismatchError,
    apply_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from posetryon.training.trainer import (
    FINAL_CHECKPOINT,
    LOG_HEADER,
    NonFiniteLossError,
    Trainer,
    TrainResult,
    partition_parameters,
    phase_for,
    train,
)

__all__ = [
    "BatchPolicy",
    "CheckpointContainer",
    "CheckpointFormatError",
    "CheckpointMismatchError",
    "FINAL_CHECKPOINT",
    "LOG_HEADER",
    "NonFiniteLossError",
    "TrainResult",
    "Trainer",
    "TrainingBatch",
    "apply_checkpoint",
    "encode_batch",
    "encode_conditions",
    "load_checkpoint",
    "make_batch",
    "partition_parameters",
    "phase_for",
    "sample_batch",
    "save_checkpoint",
    "train",
]
