"""
Storage module for datasets, checkpoints and output directories.
"""

from .tensor_io import encode_tensor, decode_tensor, write_tensor, read_tensor, to_float32
from .dataset_store import DatasetManifest, save_dataset, load_manifest, load_dataset
from .checkpoint import (
    CHECKPOINT_VERSION, Checkpoint, CheckpointHeader,
    encode_checkpoint, decode_checkpoint, save_checkpoint, load_checkpoint,
)
from .locking import output_lock

__all__ = [
    'encode_tensor', 'decode_tensor', 'write_tensor', 'read_tensor', 'to_float32',
    'DatasetManifest', 'save_dataset', 'load_manifest', 'load_dataset',
    'CHECKPOINT_VERSION', 'Checkpoint', 'CheckpointHeader',
    'encode_checkpoint', 'decode_checkpoint', 'save_checkpoint', 'load_checkpoint',
    'output_lock',
]
