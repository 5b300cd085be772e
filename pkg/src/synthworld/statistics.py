"""
Summary statistics of a synthetic world.
"""

from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field

from ..evaluation.geometry import pairwise_iou
from .world import SyntheticDataset, SyntheticImage


RECALL_IOU = 0.5
RECALL_OBJECTNESS = 0.7


class SplitStatistics(BaseModel):
    """Counts and proposal quality for one split."""
    images: int
    labelled_objects: int
    unlabelled_objects: int
    class_frequencies: Dict[str, int] = Field(default_factory=dict)
    caption_coverage: float
    captions_with_novel: int
    proposal_recall: float
    recall_per_class: Dict[str, float] = Field(default_factory=dict)


class WorldStatistics(BaseModel):
    """Per-split statistics of a dataset."""
    seed: int
    num_known: int
    num_novel: int
    vocabulary_size: int
    splits: Dict[str, SplitStatistics]


def _recalled(image: SyntheticImage) -> np.ndarray:
    """Which objects have a confident proposal at IoU >= 0.5."""
    boxes = image.all_boxes
    if len(boxes) == 0:
        return np.zeros(0, dtype=bool)
    confident = image.proposal_scores > RECALL_OBJECTNESS
    if not confident.any():
        return np.zeros(len(boxes), dtype=bool)
    overlaps = pairwise_iou(boxes, image.proposal_boxes[confident])
    return (overlaps >= RECALL_IOU).any(axis=1)


def split_statistics(dataset: SyntheticDataset, images: List[SyntheticImage]) -> SplitStatistics:
    names = {c.class_id: c.name for c in dataset.classes}
    tokens = {c.class_id: c.tokens for c in dataset.classes}
    novel = set(dataset.novel_ids)

    frequencies: Dict[str, int] = {names[c]: 0 for c in names}
    hits: Dict[int, List[bool]] = {c: [] for c in names}
    covered = total = novel_captions = labelled = unlabelled = 0
    for image in images:
        labelled += len(image.gt_classes)
        unlabelled += len(image.unlabelled_classes)
        caption = set(image.caption.tolist())
        recalled = _recalled(image)
        for c, hit in zip(image.all_classes.tolist(), recalled.tolist()):
            frequencies[names[c]] += 1
            hits[c].append(hit)
            total += 1
            covered += int(set(tokens[c]) <= caption)
        if any(set(tokens[c]) <= caption for c in novel):
            novel_captions += 1

    all_hits = [h for values in hits.values() for h in values]
    return SplitStatistics(
        images=len(images), labelled_objects=labelled, unlabelled_objects=unlabelled,
        class_frequencies=frequencies,
        caption_coverage=covered / total if total else 1.0,
        captions_with_novel=novel_captions,
        proposal_recall=float(np.mean(all_hits)) if all_hits else 0.0,
        recall_per_class={names[c]: float(np.mean(v)) for c, v in hits.items() if v},
    )


def world_statistics(dataset: SyntheticDataset) -> WorldStatistics:
    """Class frequencies, caption coverage and proposal recall per split."""
    return WorldStatistics(
        seed=dataset.config.seed, num_known=dataset.config.num_known, num_novel=dataset.config.num_novel,
        vocabulary_size=len(dataset.vocabulary),
        splits={name: split_statistics(dataset, images) for name, images in dataset.splits.items()},
    )


__all__ = ['RECALL_IOU', 'RECALL_OBJECTNESS', 'SplitStatistics', 'WorldStatistics',
           'split_statistics', 'world_statistics']
