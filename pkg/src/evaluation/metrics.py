"""
Average precision and the novel / known / generalized evaluation protocol.

Detections are matched greedily in confidence order (ties by detection
index); each takes the highest-IoU ground truth of its image that is
still unmatched, provided the IoU reaches the threshold. AP is the area
under the precision envelope, summed at the ranks where recall rises.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import get_settings
from ..models.detection import SETUPS, ClassInfo, Detection, GroundTruth
from ..models.report import (
    CONFUSION_DROP, IOU_THRESHOLDS, ClassAP, ClassDelta, EvalReport, SetupBlock, SubsetSummary,
)
from ..utils.errors import LocovError
from ..utils.logger import eval_logger, log_evaluation
from .geometry import pairwise_iou


def match_detections(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                     iou_thresh: float) -> np.ndarray:
    """True-positive flags in ranked (confidence-descending) order."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    by_image: Dict[int, np.ndarray] = {}
    for gt in gts:
        by_image.setdefault(gt.image_id, []).append(gt.box.as_array())
    boxes = {image: np.array(rows) for image, rows in by_image.items()}
    matched = {image: np.zeros(len(rows), dtype=bool) for image, rows in boxes.items()}

    flags = np.zeros(len(order), dtype=bool)
    for rank, i in enumerate(order):
        det = dets[i]
        if det.image_id not in boxes:
            continue
        overlaps = pairwise_iou(det.box.as_array(), boxes[det.image_id])[0]
        overlaps[matched[det.image_id]] = -1.0
        j = int(np.argmax(overlaps))
        if overlaps[j] >= iou_thresh:
            matched[det.image_id][j] = True
            flags[rank] = True
    return flags


def ap_from_flags(flags: np.ndarray, num_gt: int) -> float:
    """All-point interpolated AP from ranked true-positive flags."""
    if num_gt == 0 or flags.size == 0:
        return 0.0
    tp = np.cumsum(flags)
    precision = tp / np.arange(1, flags.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return math.fsum(envelope[flags].tolist()) / num_gt


def average_precision(dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thresh: float = 0.5) -> float:
    """AP of one class; 0 when there is nothing to find or nothing found."""
    return ap_from_flags(match_detections(dets, gts, iou_thresh), len(gts))


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def _class_set(setup: str, classes: Sequence[ClassInfo]) -> List[ClassInfo]:
    if setup == "generalized":
        return list(classes)
    return [c for c in classes if c.split == setup]


def _class_ap(info: ClassInfo, dets: Sequence[Detection], gts: Sequence[GroundTruth]) -> ClassAP:
    per_threshold = [average_precision(dets, gts, t) for t in IOU_THRESHOLDS]
    return ClassAP(
        class_id=info.class_id, name=info.name, split=info.split, num_gt=len(gts),
        per_threshold=per_threshold, ap=_mean(per_threshold),
        ap50=per_threshold[0], ap75=per_threshold[IOU_THRESHOLDS.index(0.75)],
    )


def _summarise(items: Sequence[ClassAP]) -> Tuple[List[float], float, float, float]:
    scored = [c for c in items if c.num_gt > 0]
    per_threshold = [_mean([c.per_threshold[t] for c in scored]) for t in range(len(IOU_THRESHOLDS))]
    return per_threshold, _mean(per_threshold), per_threshold[0], per_threshold[IOU_THRESHOLDS.index(0.75)]


def evaluate_setup(setup: str, dets: Sequence[Detection], gts: Sequence[GroundTruth],
                   classes: Sequence[ClassInfo], threads: Optional[int] = None) -> SetupBlock:
    """One block; classes without ground truth are reported but left out of the means."""
    members = _class_set(setup, classes)
    allowed = {c.class_id for c in members}
    stray = sorted({d.class_id for d in dets} - allowed)
    if stray:
        raise LocovError("setup-mismatch", f"{setup} detections carry classes {stray} outside the setup")

    dets_by_class: Dict[int, List[Detection]] = {c: [] for c in allowed}
    gts_by_class: Dict[int, List[GroundTruth]] = {c: [] for c in allowed}
    for d in dets:
        dets_by_class[d.class_id].append(d)
    for g in gts:
        if g.class_id in gts_by_class:
            gts_by_class[g.class_id].append(g)

    workers = threads or get_settings().threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_class = list(pool.map(
            lambda info: _class_ap(info, dets_by_class[info.class_id], gts_by_class[info.class_id]), members,
        ))

    per_threshold, ap, ap50, ap75 = _summarise(per_class)
    subsets = {}
    if setup == "generalized":
        for split in ("novel", "known"):
            part = [c for c in per_class if c.split == split]
            _, s_ap, s_ap50, s_ap75 = _summarise(part)
            subsets[split] = SubsetSummary(
                ap=s_ap, ap50=s_ap50, ap75=s_ap75, num_classes=sum(1 for c in part if c.num_gt > 0),
            )
    return SetupBlock(
        setup=setup, class_ids=[c.class_id for c in members], num_detections=len(dets),
        per_threshold=per_threshold, ap=ap, ap50=ap50, ap75=ap75, classes=per_class, subsets=subsets,
    )


def class_deltas(blocks: Mapping[str, SetupBlock]) -> List[ClassDelta]:
    """Generalized minus constrained AP for every class with ground truth."""
    if "generalized" not in blocks:
        return []
    general = {c.class_id: c for c in blocks["generalized"].classes}
    deltas = []
    for setup in ("novel", "known"):
        if setup not in blocks:
            continue
        for own in blocks[setup].classes:
            if own.num_gt == 0:
                continue
            other = general[own.class_id]
            delta = other.ap - own.ap
            deltas.append(ClassDelta(
                class_id=own.class_id, name=own.name, split=own.split,
                individual_ap=own.ap, generalized_ap=other.ap, delta_ap=delta,
                individual_ap50=own.ap50, generalized_ap50=other.ap50, delta_ap50=other.ap50 - own.ap50,
                confused=delta < -CONFUSION_DROP,
            ))
    return sorted(deltas, key=lambda d: d.class_id)


def evaluate(dets_per_setup: Mapping[str, Sequence[Detection]], gts: Sequence[GroundTruth],
             classes: Sequence[ClassInfo], threads: Optional[int] = None,
             split: Optional[str] = None) -> EvalReport:
    """Evaluate each given setup with the detections produced for it."""
    classes = list(getattr(classes, "classes", classes))
    unknown = [s for s in dets_per_setup if s not in SETUPS]
    if unknown:
        raise LocovError("setup-mismatch", f"unknown setups {unknown}")
    known_ids = {c.class_id for c in classes}
    missing = sorted({g.class_id for g in gts} - known_ids)
    if missing:
        raise LocovError("setup-mismatch", f"ground truth uses classes {missing} absent from the catalog")

    blocks = {
        setup: evaluate_setup(setup, dets_per_setup[setup], gts, classes, threads)
        for setup in SETUPS if setup in dets_per_setup
    }
    report = EvalReport(blocks=blocks, deltas=class_deltas(blocks), split=split)
    for setup, block in blocks.items():
        num_gt = sum(c.num_gt for c in block.classes)
        log_evaluation(setup=setup, num_detections=block.num_detections, num_ground_truths=num_gt,
                       ap=block.ap, ap50=block.ap50, ap75=block.ap75)
    confused = [d.name for d in report.deltas if d.confused]
    if confused:
        eval_logger.info("Classes confused in the generalized setup", classes=confused)
    return report


__all__ = [
    'match_detections', 'ap_from_flags', 'average_precision',
    'evaluate_setup', 'class_deltas', 'evaluate',
]
