"""
Specialized task tuning: supervised background-aware classification on
known classes, starting from the matching-stage weights with part of the
network frozen, and early stopping on validation generalized AP.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import SGD, StepDecaySchedule
from ..detector.classifier import STTBatch, stt_train_step
from ..detector.freezing import apply_freeze_policy, group_checksums
from ..evaluation.geometry import pairwise_iou
from ..models.detection import BACKGROUND_ID
from ..models.experiment import ExperimentConfig
from ..network import DetectorNetwork
from ..storage.checkpoint import Checkpoint, save_checkpoint
from ..synthworld.world import SyntheticDataset, SyntheticImage
from ..utils.errors import LocovError, NonFiniteLossError
from ..utils.logger import log_execution_time, log_training_step, set_stage, train_logger
from .common import STT_METRIC_KEYS, MetricsLog, dump_nonfinite, snapshot
from .evaluate import run_evaluation


STT_CHECKPOINT = "stt.ckpt"
STT_METRICS = "stt_metrics.jsonl"

_BATCH_STREAM = 31


def stt_samples(image: SyntheticImage, foreground_iou: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Raw features and labels of one image.

    Labelled boxes are positives of their class. A proposal takes the
    class of its best labelled box at IoU >= ``foreground_iou`` and is
    background otherwise.
    """
    labels = np.full(len(image.proposal_boxes), BACKGROUND_ID, dtype=np.int64)
    if len(image.gt_boxes) and len(image.proposal_boxes):
        overlaps = pairwise_iou(image.proposal_boxes, image.gt_boxes)
        best = np.argmax(overlaps, axis=1)
        positive = overlaps[np.arange(len(best)), best] >= foreground_iou
        labels[positive] = image.gt_classes[best[positive]]
    features = np.concatenate([image.gt_features, image.proposal_features]).reshape(-1, image.proposal_features.shape[-1])
    return features, np.concatenate([image.gt_classes.astype(np.int64), labels])


def build_stt_batch(images: Sequence[SyntheticImage], foreground_iou: float = 0.5) -> STTBatch:
    parts = [stt_samples(image, foreground_iou) for image in images]
    return STTBatch(
        features=np.concatenate([f for f, _ in parts]),
        labels=np.concatenate([l for _, l in parts]),
    )


@dataclass
class STTResult:
    checkpoint: Path
    metrics: Path
    steps_run: int
    best_step: int
    best_val_ap: Optional[float]
    frozen: List[str]
    losses: List[float] = field(default_factory=list)
    checksums_before: Dict[str, str] = field(default_factory=dict)
    checksums_after: Dict[str, str] = field(default_factory=dict)


@log_execution_time("workflows.train_stt")
def train_stt(config: ExperimentConfig, dataset: SyntheticDataset, out_dir: Union[str, Path],
              lsm: Optional[Checkpoint] = None, network: Optional[DetectorNetwork] = None) -> STTResult:
    """Tune on the train split's known labels; ``lsm=None`` starts from initialization."""
    set_stage("STT")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    network = network or DetectorNetwork.for_dataset(config, dataset)
    if lsm is not None:
        if lsm.stage != "LSM":
            raise LocovError("wrong-stage-checkpoint", f"task tuning needs an LSM checkpoint, got {lsm.stage}")
        network.load_state(lsm.params)

    groups = network.stt_groups()
    frozen = apply_freeze_policy(groups, config.freeze, network.encoder.num_stages)
    network.fusion.group.set_trainable(False)
    checksums_before = group_checksums(g for g in groups if g.name in frozen)

    stt = config.stt
    optimizer = SGD(groups, momentum=stt.schedule.momentum)
    schedule = StepDecaySchedule(stt.schedule.base_rate, stt.schedule.decay_steps, stt.schedule.decay_factor)
    images = dataset.split("train")
    rng = np.random.default_rng([config.seed, _BATCH_STREAM])
    per_batch = min(stt.images_per_batch, len(images))
    has_val = "val" in dataset.splits and len(dataset.splits["val"]) > 0
    train_logger.info("Starting task tuning", steps=stt.steps, frozen=frozen, images_per_batch=per_batch)

    best_state = network.state()
    best_ap: Optional[float] = None
    best_step, stale, steps_run = 0, 0, 0
    losses: List[float] = []
    metrics_path = out_dir / STT_METRICS
    with MetricsLog(metrics_path, STT_METRIC_KEYS) as metrics:
        for step in range(stt.steps):
            chosen = rng.choice(len(images), size=per_batch, replace=False)
            batch = build_stt_batch([images[i] for i in chosen], stt.foreground_iou)
            lr = schedule.rate(step)
            try:
                loss = stt_train_step(batch, network.encoder, network.projection, network.catalog, optimizer, lr)
            except NonFiniteLossError as exc:
                raise dump_nonfinite(network, "STT", step, {"classification": math.nan}, out_dir) from exc
            losses.append(loss)
            steps_run = step + 1

            val_ap = val_ap50 = None
            if has_val and steps_run % stt.eval_every == 0:
                report, _ = run_evaluation(network, dataset, "val", ("generalized",))
                val_ap, val_ap50 = report.blocks["generalized"].ap, report.blocks["generalized"].ap50
                if best_ap is None or val_ap > best_ap:
                    best_ap, best_step, stale = val_ap, steps_run, 0
                    best_state = network.state()
                else:
                    stale += 1

            metrics.write(stage="STT", step=step, lr=lr, loss_total=loss, classification=loss,
                          val_generalized_ap=val_ap, val_generalized_ap50=val_ap50)
            log_training_step("STT", step, lr, loss, {"classification": loss})
            if stt.checkpoint_every and steps_run % stt.checkpoint_every == 0 and steps_run < stt.steps:
                save_checkpoint(snapshot(network, "STT", steps_run, optimizer), out_dir / f"stt_step{steps_run:06d}.ckpt")
            if stale >= stt.patience:
                train_logger.info("Early stopping", step=steps_run, best_step=best_step, best_val_ap=best_ap)
                break

    if best_ap is None:
        best_step = steps_run
    else:
        network.load_state(best_state)
    checksums_after = group_checksums(g for g in groups if g.name in frozen)
    changed = sorted(n for n in checksums_before if checksums_before[n] != checksums_after[n])
    if changed:
        raise LocovError("invalid-config", f"frozen groups changed during task tuning: {changed}")

    extra = {"best_step": best_step, "best_val_ap": best_ap, "frozen": frozen, "steps_run": steps_run}
    path = save_checkpoint(snapshot(network, "STT", best_step, optimizer, extra), out_dir / STT_CHECKPOINT)
    train_logger.info("Task tuning finished", steps_run=steps_run, best_step=best_step, best_val_ap=best_ap)
    return STTResult(
        checkpoint=path, metrics=metrics_path, steps_run=steps_run, best_step=best_step,
        best_val_ap=best_ap, frozen=frozen, losses=losses,
        checksums_before=checksums_before, checksums_after=checksums_after,
    )


__all__ = ['STT_CHECKPOINT', 'STT_METRICS', 'STTResult', 'stt_samples', 'build_stt_batch', 'train_stt']
