"""
Dataset directory reader and writer.

    <root>/manifest.json          format version, world config, seed, classes, split files
    <root>/vocab.txt              one token per line
    <root>/prototypes.bin         raw class prototypes
    <root>/<split>/records.jsonl  per-image labels, caption and proposal count
    <root>/<split>/*.bin          concatenated per-split tensors
"""

import json
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from pydantic import BaseModel, Field

from ..embeddings.vocabulary import Vocabulary
from ..models.detection import ClassInfo
from ..models.experiment import WorldConfig
from ..synthworld.world import SyntheticDataset, SyntheticImage
from ..utils.errors import LocovError
from ..utils.logger import storage_logger
from .tensor_io import read_tensor, write_tensor


DATASET_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
VOCAB_NAME = "vocab.txt"

# Row-concatenated arrays; counts come from the records
_RAGGED = {
    "gt_boxes": ("num_gt", 4),
    "gt_features": ("num_gt", None),
    "unlabelled_boxes": ("num_unlabelled", 4),
    "unlabelled_features": ("num_unlabelled", None),
    "proposal_boxes": ("num_proposals", 4),
    "proposal_scores": ("num_proposals", 0),
    "proposal_features": ("num_proposals", None),
}


class ImageRecord(BaseModel):
    """One line of ``records.jsonl``."""
    image_id: int
    gt_classes: List[int]
    unlabelled_classes: List[int]
    caption: List[int]
    num_proposals: int


class SplitEntry(BaseModel):
    images: int
    files: List[str]


class DatasetManifest(BaseModel):
    format_version: int = DATASET_FORMAT_VERSION
    seed: int
    config: WorldConfig
    classes: List[ClassInfo]
    vocabulary: str = VOCAB_NAME
    splits: Dict[str, SplitEntry] = Field(default_factory=dict)


def _write_split(directory: Path, images: List[SyntheticImage], feature_dim: int) -> List[str]:
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "records.jsonl").open("w", encoding="utf-8") as handle:
        for image in images:
            record = ImageRecord(
                image_id=image.image_id, gt_classes=image.gt_classes.tolist(),
                unlabelled_classes=image.unlabelled_classes.tolist(), caption=image.caption.tolist(),
                num_proposals=len(image.proposal_scores),
            )
            handle.write(record.model_dump_json() + "\n")
    files = ["records.jsonl"]
    for name, (_, width) in _RAGGED.items():
        parts = [getattr(image, name) for image in images]
        if width == 0:
            stacked = np.concatenate(parts) if parts else np.zeros(0)
        else:
            cols = feature_dim if width is None else width
            stacked = np.concatenate([p.reshape(-1, cols) for p in parts]) if parts else np.zeros((0, cols))
        write_tensor(directory / f"{name}.bin", stacked)
        files.append(f"{name}.bin")
    grid = np.stack([image.grid_features for image in images]) if images else np.zeros((0, 1, 1, feature_dim))
    write_tensor(directory / "grid_features.bin", grid)
    files.append("grid_features.bin")
    return files


def save_dataset(dataset: SyntheticDataset, root: Union[str, Path]) -> Path:
    """Write every split plus manifest and vocabulary under ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    dataset.vocabulary.save(root / VOCAB_NAME)
    write_tensor(root / "prototypes.bin", dataset.raw_prototypes)
    manifest = DatasetManifest(seed=dataset.config.seed, config=dataset.config, classes=dataset.classes)
    for split, images in dataset.splits.items():
        files = _write_split(root / split, images, dataset.config.feature_dim)
        manifest.splits[split] = SplitEntry(images=len(images), files=files)
    (root / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    storage_logger.info("Dataset written", path=str(root), splits=list(manifest.splits))
    return root


def load_manifest(root: Union[str, Path]) -> DatasetManifest:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise LocovError("invalid-config", f"no dataset manifest at {path}")
    manifest = DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    if manifest.format_version != DATASET_FORMAT_VERSION:
        raise LocovError("invalid-config", f"dataset format {manifest.format_version} is not supported")
    return manifest


def _load_split(directory: Path, feature_dim: int) -> List[SyntheticImage]:
    records = [
        ImageRecord.model_validate_json(line)
        for line in (directory / "records.jsonl").read_text(encoding="utf-8").splitlines() if line
    ]
    arrays = {name: read_tensor(directory / f"{name}.bin") for name in _RAGGED}
    grid = read_tensor(directory / "grid_features.bin")
    cursors = {"num_gt": 0, "num_unlabelled": 0, "num_proposals": 0}

    images = []
    for index, record in enumerate(records):
        counts = {
            "num_gt": len(record.gt_classes),
            "num_unlabelled": len(record.unlabelled_classes),
            "num_proposals": record.num_proposals,
        }
        fields = {}
        for name, (count_key, width) in _RAGGED.items():
            start = cursors[count_key]
            rows = arrays[name][start:start + counts[count_key]]
            fields[name] = rows if width == 0 else rows.reshape(-1, feature_dim if width is None else width)
        for key, n in counts.items():
            cursors[key] += n
        images.append(SyntheticImage(
            image_id=record.image_id,
            gt_classes=np.array(record.gt_classes, dtype=np.int64),
            unlabelled_classes=np.array(record.unlabelled_classes, dtype=np.int64),
            caption=np.array(record.caption, dtype=np.int64),
            grid_features=grid[index],
            **fields,
        ))
    return images


def load_dataset(root: Union[str, Path], splits: Union[List[str], None] = None) -> SyntheticDataset:
    """Read a dataset directory; ``splits`` limits which splits are loaded."""
    root = Path(root)
    manifest = load_manifest(root)
    wanted = list(manifest.splits) if splits is None else splits
    missing = [s for s in wanted if s not in manifest.splits]
    if missing:
        raise LocovError("invalid-config", f"dataset at {root} has no split(s) {missing}")
    vocabulary = Vocabulary.load(root / manifest.vocabulary)
    loaded = {s: _load_split(root / s, manifest.config.feature_dim) for s in wanted}
    storage_logger.debug("Dataset loaded", path=str(root), splits=wanted)
    return SyntheticDataset(
        config=manifest.config, classes=manifest.classes, vocabulary=vocabulary, splits=loaded,
        raw_prototypes=read_tensor(root / "prototypes.bin"),
    )


__all__ = [
    'DATASET_FORMAT_VERSION', 'ImageRecord', 'SplitEntry', 'DatasetManifest',
    'save_dataset', 'load_manifest', 'load_dataset',
]
