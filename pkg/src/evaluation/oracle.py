"""
Exhaustive reference for average precision and the setup means.

Plain Python throughout: every cutoff of the ranked list gets its own
recount of true positives, and the interpolated precision at a recall
level is the best precision over all cutoffs reaching at least that
recall. Slow on purpose; used to cross-check ``evaluate``.
"""

import math
from typing import Dict, List, Mapping, Sequence, Tuple

from ..models.detection import ClassInfo, Detection, GroundTruth
from ..models.report import IOU_THRESHOLDS


def _box_iou(a, b) -> float:
    ix = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = ix * iy
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def _ranked_hits(dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thresh: float) -> List[bool]:
    ranked = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    used = [False] * len(gts)
    hits: List[bool] = []
    for i in ranked:
        det = dets[i]
        best, best_j = -1.0, -1
        for j, gt in enumerate(gts):
            if gt.image_id != det.image_id or used[j]:
                continue
            overlap = _box_iou(det.box, gt.box)
            if overlap > best:
                best, best_j = overlap, j
        if best_j >= 0 and best >= iou_thresh:
            used[best_j] = True
        hits.append(best_j >= 0 and best >= iou_thresh)
    return hits


def _curve(hits: Sequence[bool]) -> List[Tuple[int, float]]:
    """(true positives, precision) at every cutoff of the ranked list."""
    points = []
    for cutoff in range(1, len(hits) + 1):
        found = sum(1 for h in hits[:cutoff] if h)
        points.append((found, found / cutoff))
    return points


def brute_force_average_precision(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                                  iou_thresh: float = 0.5) -> float:
    if not gts or not dets:
        return 0.0
    points = _curve(_ranked_hits(dets, gts, iou_thresh))
    terms = []
    previous = 0
    for found, _ in points:
        if found == previous:
            continue
        # recall rose to found / num_gt here
        terms.append(max(p for f, p in points if f >= found))
        previous = found
    return math.fsum(terms) / len(gts)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def brute_force_evaluate(dets_per_setup: Mapping[str, Sequence[Detection]], gts: Sequence[GroundTruth],
                         classes: Sequence[ClassInfo]) -> Dict[str, Dict[str, object]]:
    """Per setup: per-class AP at every threshold plus the ap / ap50 / ap75 means."""
    out: Dict[str, Dict[str, object]] = {}
    for setup, dets in dets_per_setup.items():
        members = [c for c in classes if setup == "generalized" or c.split == setup]
        per_class: Dict[int, List[float]] = {}
        for info in members:
            own_dets = [d for d in dets if d.class_id == info.class_id]
            own_gts = [g for g in gts if g.class_id == info.class_id]
            if own_gts:
                per_class[info.class_id] = [brute_force_average_precision(own_dets, own_gts, t)
                                            for t in IOU_THRESHOLDS]
        per_threshold = [_mean([values[t] for values in per_class.values()]) for t in range(len(IOU_THRESHOLDS))]
        out[setup] = {
            "classes": per_class,
            "per_threshold": per_threshold,
            "ap": _mean(per_threshold),
            "ap50": per_threshold[0],
            "ap75": per_threshold[IOU_THRESHOLDS.index(0.75)],
        }
    return out


__all__ = ['brute_force_average_precision', 'brute_force_evaluate']
