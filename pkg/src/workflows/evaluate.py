"""
Detection over a split and evaluation under the three setups.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from ..config import get_settings
from ..detector.catalog import SETUP_CLASS_SET
from ..detector.inference import detect
from ..evaluation.metrics import evaluate
from ..models.detection import SETUPS, Detection, GroundTruth
from ..models.report import EvalReport
from ..network import DetectorNetwork, detection_regions
from ..storage.checkpoint import Checkpoint
from ..synthworld.world import SyntheticDataset, SyntheticImage
from ..utils.errors import LocovError
from ..utils.logger import eval_logger, log_execution_time


def resolve_setups(setup: str) -> List[str]:
    """``all`` expands to every setup, in report order."""
    if setup == "all":
        return list(SETUPS)
    if setup not in SETUPS:
        raise LocovError("setup-mismatch", f"unknown setup {setup!r}")
    return [setup]


def detect_image(network: DetectorNetwork, image: SyntheticImage, setup: str) -> List[Detection]:
    config = network.config
    projected = network.encode_regions(detection_regions(image, config.regions))
    return detect(projected, network.catalog, SETUP_CLASS_SET[setup],
                  config.stt.score_threshold, config.stt.nms_iou)


def detect_images(network: DetectorNetwork, images: Sequence[SyntheticImage], setup: str,
                  threads: Optional[int] = None) -> List[Detection]:
    """Images run in parallel; output keeps image order."""
    workers = threads or get_settings().threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_image = list(pool.map(lambda image: detect_image(network, image, setup), images))
    return [d for dets in per_image for d in dets]


def ground_truths(images: Sequence[SyntheticImage]) -> List[GroundTruth]:
    return [g for image in images for g in image.ground_truth()]


@log_execution_time("workflows.run_evaluation")
def run_evaluation(network: DetectorNetwork, dataset: SyntheticDataset, split: str,
                   setups: Sequence[str] = SETUPS, threads: Optional[int] = None):
    """Returns the report and the detections produced for each setup."""
    images = dataset.split(split)
    detections: Dict[str, List[Detection]] = {
        setup: detect_images(network, images, setup, threads) for setup in setups
    }
    report = evaluate(detections, ground_truths(images), network.catalog.classes, threads, split=split)
    eval_logger.info("Evaluated split", split=split, setups=list(setups), images=len(images))
    return report, detections


def write_detections(detections: Sequence[Detection], path: Union[str, Path]) -> Path:
    """Line-delimited records: image id, box, class id, confidence."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for d in detections:
            handle.write(json.dumps({
                "image_id": d.image_id,
                "box": [d.box.x1, d.box.y1, d.box.x2, d.box.y2],
                "class_id": d.class_id,
                "confidence": d.confidence,
            }) + "\n")
    return path


def load_network(checkpoint: Checkpoint, dataset: SyntheticDataset) -> DetectorNetwork:
    """Rebuild the network a checkpoint was saved from and load its parameters."""
    network = DetectorNetwork.for_dataset(checkpoint.config, dataset)
    network.load_state(checkpoint.params)
    return network


def generalized_ap(report: EvalReport) -> float:
    return report.blocks["generalized"].ap


__all__ = [
    'resolve_setups', 'detect_image', 'detect_images', 'ground_truths',
    'run_evaluation', 'write_detections', 'load_network', 'generalized_ap',
]
