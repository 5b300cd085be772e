"""
Box overlap and greedy non-maximum suppression.
"""

from typing import List, Union

import numpy as np

from ..models.detection import Box
from ..utils.errors import LocovError
from ..utils.validators import require_same_length


BoxLike = Union[Box, np.ndarray]


def _as_boxes(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    bad = (boxes[:, 0] >= boxes[:, 2]) | (boxes[:, 1] >= boxes[:, 3]) | ~np.isfinite(boxes).all(axis=1)
    if bad.any():
        raise LocovError("invalid-box", f"degenerate box {boxes[bad][0].tolist()}")
    return boxes


def iou(a: BoxLike, b: BoxLike) -> float:
    """Intersection over union of two boxes."""
    a = a.as_array() if isinstance(a, Box) else a
    b = b.as_array() if isinstance(b, Box) else b
    return float(pairwise_iou(a, b)[0, 0])


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """N x M IoU matrix for N x 4 and M x 4 boxes."""
    a, b = _as_boxes(a), _as_boxes(b)
    xx1 = np.maximum(a[:, None, 0], b[None, :, 0])
    yy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    xx2 = np.minimum(a[:, None, 2], b[None, :, 2])
    yy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.maximum(0.0, xx2 - xx1) * np.maximum(0.0, yy2 - yy1)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.clip(inter / union, 0.0, 1.0)


def nms(boxes: np.ndarray, scores: np.ndarray, threshold: float) -> List[int]:
    """Greedy suppression: keep the best box, drop overlaps above ``threshold``, repeat.

    Equal scores keep input order.
    """
    boxes = _as_boxes(boxes)
    scores = np.asarray(scores, dtype=np.float64)
    require_same_length(boxes, scores, "boxes and scores")
    order = np.argsort(-scores, kind="stable")
    overlaps = pairwise_iou(boxes, boxes) if len(boxes) else np.zeros((0, 0))

    keep: List[int] = []
    while order.size > 0:
        i = int(order[0])
        keep.append(i)
        rest = order[1:]
        order = rest[overlaps[i, rest] <= threshold]
    return keep


__all__ = ['iou', 'pairwise_iou', 'nms']
