"""
Checkpoint files.

Layout: magic ``LCVK``, uint64 header length, UTF-8 JSON header, then
the payload of little-endian float32 values. The header lists every
tensor's name, shape and byte offset into the payload, together with the
format version, stage tag, step counter and the experiment config.
"""

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field

from ..models.experiment import ExperimentConfig
from ..utils.errors import LocovError
from ..utils.logger import storage_logger
from .tensor_io import FLOAT_DTYPE


CHECKPOINT_MAGIC = b"LCVK"
CHECKPOINT_VERSION = 1

Stage = Literal["LSM", "STT"]


class TensorEntry(BaseModel):
    name: str
    kind: Literal["param", "velocity"]
    shape: List[int]
    offset: int


class CheckpointHeader(BaseModel):
    format_version: int
    stage: Stage
    step: int
    config: ExperimentConfig
    tensors: List[TensorEntry]
    extra: Dict[str, Any] = Field(default_factory=dict)


@dataclass
class Checkpoint:
    """Parameters keyed ``group.param`` plus optimizer velocity."""
    stage: Stage
    step: int
    config: ExperimentConfig
    params: Dict[str, np.ndarray]
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    entries, chunks, offset = [], [], 0
    for kind, store in (("param", ckpt.params), ("velocity", ckpt.velocity)):
        for name in sorted(store):
            values = np.asarray(store[name], dtype=FLOAT_DTYPE)
            if not np.all(np.isfinite(values)):
                raise LocovError("non-finite-loss", f"checkpoint tensor {name} is not finite")
            entries.append(TensorEntry(name=name, kind=kind, shape=list(values.shape), offset=offset))
            data = values.tobytes(order="C")
            chunks.append(data)
            offset += len(data)
    header = CheckpointHeader(
        format_version=CHECKPOINT_VERSION, stage=ckpt.stage, step=ckpt.step,
        config=ckpt.config, tensors=entries, extra=ckpt.extra,
    )
    header_bytes = header.model_dump_json().encode("utf-8")
    return CHECKPOINT_MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(chunks)


def decode_checkpoint(buffer: bytes) -> Checkpoint:
    if buffer[:4] != CHECKPOINT_MAGIC:
        raise LocovError("invalid-config", "not a checkpoint file")
    (length,) = struct.unpack_from("<Q", buffer, 4)
    try:
        header = CheckpointHeader.model_validate_json(buffer[12:12 + length])
    except ValueError as exc:
        raise LocovError("invalid-config", f"unreadable checkpoint header: {exc}") from exc
    if header.format_version != CHECKPOINT_VERSION:
        raise LocovError("invalid-config", f"checkpoint format {header.format_version} is not supported")

    payload = memoryview(buffer)[12 + length:]
    params: Dict[str, np.ndarray] = {}
    velocity: Dict[str, np.ndarray] = {}
    for entry in header.tensors:
        count = int(np.prod(entry.shape)) if entry.shape else 1
        end = entry.offset + count * FLOAT_DTYPE.itemsize
        if end > len(payload):
            raise LocovError("invalid-config", f"checkpoint payload truncated at {entry.name}")
        values = np.frombuffer(payload, dtype=FLOAT_DTYPE, count=count, offset=entry.offset)
        target = params if entry.kind == "param" else velocity
        target[entry.name] = values.astype(np.float64).reshape(entry.shape)
    return Checkpoint(
        stage=header.stage, step=header.step, config=header.config,
        params=params, velocity=velocity, extra=dict(header.extra),
    )


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> Path:
    """Write atomically through a temporary sibling."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(ckpt))
    os.replace(tmp, path)
    storage_logger.info("Checkpoint saved", path=str(path), stage=ckpt.stage, step=ckpt.step)
    return path


def load_checkpoint(path: Union[str, Path], expected_stage: Optional[Stage] = None) -> Checkpoint:
    path = Path(path)
    try:
        buffer = path.read_bytes()
    except OSError as exc:
        raise LocovError("invalid-config", f"cannot read checkpoint {path}: {exc.strerror}") from exc
    ckpt = decode_checkpoint(buffer)
    if expected_stage is not None and ckpt.stage != expected_stage:
        raise LocovError("wrong-stage-checkpoint", f"{path} is a {ckpt.stage} checkpoint, expected {expected_stage}")
    return ckpt


__all__ = [
    'CHECKPOINT_MAGIC', 'CHECKPOINT_VERSION', 'Stage',
    'TensorEntry', 'CheckpointHeader', 'Checkpoint',
    'encode_checkpoint', 'decode_checkpoint', 'save_checkpoint', 'load_checkpoint',
]
