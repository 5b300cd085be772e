"""
Detection from projected box-regions.
"""

from typing import List

import numpy as np

from ..autodiff import Tensor
from ..models.detection import Box, Detection
from ..evaluation.geometry import nms
from ..regions.providers import RegionSet
from ..utils.validators import require_unit_interval
from .catalog import ClassCatalog
from .classifier import classify_regions


DEFAULT_SCORE_THRESHOLD = 0.05
DEFAULT_NMS_IOU = 0.5


def region_probabilities(features: Tensor, catalog: ClassCatalog, class_set: str) -> np.ndarray:
    """N x (K + 1) class-plus-background probabilities as a plain array."""
    if features.shape[0] == 0:
        return np.zeros((0, len(catalog.members(class_set)) + 1))
    return classify_regions(features.detach(), catalog.embeddings(class_set).detach()).data


def detect(regions: RegionSet, catalog: ClassCatalog, class_set: str,
           score_threshold: float = DEFAULT_SCORE_THRESHOLD, nms_iou: float = DEFAULT_NMS_IOU) -> List[Detection]:
    """Argmax class per box-region, background and low scores dropped, per-class NMS.

    Returned in descending confidence; equal confidences keep region order.
    """
    require_unit_interval(score_threshold, "score_threshold")
    require_unit_interval(nms_iou, "nms_iou")
    probs = region_probabilities(regions.box_features, catalog, class_set)
    if probs.shape[0] == 0:
        return []
    class_ids = catalog.ids(class_set)
    background = probs.shape[1] - 1

    best = np.argmax(probs, axis=1)
    keep = (best != background)
    scores = probs[np.arange(len(best)), best]
    keep &= scores >= score_threshold

    selected: List[int] = []
    for column in np.unique(best[keep]):
        members = np.flatnonzero(keep & (best == column))
        survivors = nms(regions.boxes[members], scores[members], nms_iou)
        selected.extend(int(members[i]) for i in survivors)

    selected.sort(key=lambda i: (-scores[i], i))
    return [
        Detection(
            image_id=regions.image_id, box=Box.from_array(regions.boxes[i]),
            class_id=int(class_ids[best[i]]), confidence=float(min(1.0, max(0.0, scores[i]))),
        )
        for i in selected
    ]


__all__ = ['DEFAULT_SCORE_THRESHOLD', 'DEFAULT_NMS_IOU', 'region_probabilities', 'detect']
