"""
Binary tensor format shared by datasets and checkpoints.

Layout: 4-byte magic ``LCVT``, uint32 rank, rank x uint32 extents, then
the values as little-endian float32 in row-major order. All integers
are little-endian.
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..utils.errors import LocovError


TENSOR_MAGIC = b"LCVT"
FLOAT_DTYPE = np.dtype("<f4")


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if not np.all(np.isfinite(array)):
        raise LocovError("non-finite-loss", "refusing to store non-finite values")
    header = TENSOR_MAGIC + struct.pack("<I", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=FLOAT_DTYPE).tobytes()


def decode_tensor(buffer: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Decode one tensor at ``offset``; returns it (as float64) and the next offset."""
    if buffer[offset:offset + 4] != TENSOR_MAGIC:
        raise LocovError("invalid-config", f"bad tensor magic at byte {offset}")
    (rank,) = struct.unpack_from("<I", buffer, offset + 4)
    shape = struct.unpack_from(f"<{rank}I", buffer, offset + 8)
    start = offset + 8 + 4 * rank
    count = int(np.prod(shape)) if rank else 1
    end = start + count * FLOAT_DTYPE.itemsize
    if end > len(buffer):
        raise LocovError("invalid-config", "tensor payload truncated")
    values = np.frombuffer(buffer, dtype=FLOAT_DTYPE, count=count, offset=start)
    return values.astype(np.float64).reshape(shape), end


def write_tensor(path: Union[str, Path], array: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(encode_tensor(array))
    return path


def read_tensor(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        buffer = path.read_bytes()
    except OSError as exc:
        raise LocovError("invalid-config", f"cannot read tensor file {path}: {exc.strerror}") from exc
    array, end = decode_tensor(buffer)
    if end != len(buffer):
        raise LocovError("invalid-config", f"trailing bytes in {path}")
    return array


def to_float32(array: np.ndarray) -> np.ndarray:
    """Values exactly as they will read back from disk."""
    return np.asarray(array, dtype=FLOAT_DTYPE).astype(np.float64)


__all__ = ['TENSOR_MAGIC', 'encode_tensor', 'decode_tensor', 'write_tensor', 'read_tensor', 'to_float32']
