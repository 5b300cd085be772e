"""
Localized semantic matching: image-caption training of the projection,
encoder and fusion model with the four-term objective.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..autodiff import SGD, StepDecaySchedule, Tensor, backward, ops
from ..embeddings.encoding import embed_padded
from ..embeddings.vocabulary import PAD_ID
from ..fusion.objectives import (
    consistency_loss, icm_loss, lsm_total_loss, mask_tokens, match_distribution, mlm_loss,
)
from ..matching.grounding import batch_similarity, total_grounding_loss
from ..models.experiment import ExperimentConfig, LossToggles, RegionConfig
from ..network import DetectorNetwork, image_regions, raw_region_batches
from ..regions.batching import RegionBatch
from ..storage.checkpoint import save_checkpoint
from ..synthworld.world import SyntheticDataset, SyntheticImage
from ..utils.validators import require_nonempty
from ..utils.logger import log_execution_time, log_training_step, set_stage, train_logger
from .common import LSM_METRIC_KEYS, MetricsLog, dump_nonfinite, snapshot


LSM_CHECKPOINT = "lsm.ckpt"
LSM_METRICS = "lsm_metrics.jsonl"

# Seed stream for batch sampling and token masking
_BATCH_STREAM = 21


@dataclass
class LSMBatch:
    """Padded caption ids and raw region batches of the enabled kinds."""
    ids: np.ndarray
    regions: Dict[str, RegionBatch]

    @property
    def batch_size(self) -> int:
        return self.ids.shape[0]


def pad_captions(captions: Sequence[np.ndarray]) -> np.ndarray:
    width = max(len(c) for c in captions)
    ids = np.full((len(captions), width), PAD_ID, dtype=np.int64)
    for row, caption in enumerate(captions):
        ids[row, :len(caption)] = caption
    return ids


def build_lsm_batch(images: Sequence[SyntheticImage], regions: RegionConfig, known_ids: Sequence[int]) -> LSMBatch:
    require_nonempty(images, "empty-side", "matching batch")
    sets = [image_regions(image, regions, known_ids) for image in images]
    return LSMBatch(pad_captions([image.caption for image in images]), raw_region_batches(sets))


def _joint(batches: Dict[str, RegionBatch]) -> RegionBatch:
    """Box and grid regions of each image side by side."""
    parts = [batches[k] for k in ("box", "grid") if k in batches]
    if len(parts) == 1:
        return parts[0]
    features = ops.concat([p.features for p in parts], axis=1)
    mask = np.concatenate([p.mask for p in parts], axis=1)
    return RegionBatch(features, mask, "joint")


def pre_fusion_targets(network: DetectorNetwork, batch: LSMBatch) -> Dict[str, Tensor]:
    """Pre-fusion match distributions per region kind, cut from the graph."""
    words, word_mask = embed_padded(batch.ids, network.table)
    return {
        kind: match_distribution(batch_similarity(network.encode_batch(rb), words, word_mask)).detach()
        for kind, rb in batch.regions.items()
    }


def lsm_terms(network: DetectorNetwork, batch: LSMBatch, toggles: LossToggles,
              rng: np.random.Generator,
              targets: Optional[Dict[str, Tensor]] = None) -> Dict[str, Union[Tensor, float]]:
    """The four matching-stage losses; disabled terms are exactly 0.0 and build no graph.

    ``targets`` replaces the pre-fusion distributions of the consistency
    term with fixed values, as computed by :func:`pre_fusion_targets`.
    """
    words, word_mask = embed_padded(batch.ids, network.table)
    encoded = {kind: network.encode_batch(rb) for kind, rb in batch.regions.items()}

    similarities: Dict[str, Tensor] = {}
    if toggles.grounding or toggles.consistency:
        similarities = {k: batch_similarity(rb, words, word_mask) for k, rb in encoded.items()}
    fused: Dict[str, Tensor] = {}
    if toggles.icm or toggles.consistency:
        fused = {k: network.fusion.scores(rb.features, rb.mask, words, word_mask) for k, rb in encoded.items()}

    terms: Dict[str, Union[Tensor, float]] = {"grounding": 0.0, "icm": 0.0, "mlm": 0.0, "consistency": 0.0}
    if toggles.grounding:
        terms["grounding"] = total_grounding_loss(similarities.get("box"), similarities.get("grid"))
    if toggles.icm:
        total = None
        for scores in fused.values():
            term = icm_loss(scores)
            total = term if total is None else total + term
        terms["icm"] = total
    if toggles.mlm:
        masked = mask_tokens(batch.ids, rng, toggles.mask_ratio)
        terms["mlm"] = mlm_loss(masked, _joint(encoded), network.fusion, network.table)
    if toggles.consistency:
        p = targets if targets is not None else {k: match_distribution(s) for k, s in similarities.items()}
        q = {k: match_distribution(s) for k, s in fused.items()}
        terms["consistency"] = consistency_loss(
            p.get("box"), p.get("grid"), q.get("box"), q.get("grid"),
            bidirectional=toggles.consistency_bidirectional,
        )
    return terms


def term_values(terms: Dict[str, Union[Tensor, float]]) -> Dict[str, float]:
    return {k: (v.item() if isinstance(v, Tensor) else float(v)) for k, v in terms.items()}


@dataclass
class LSMResult:
    checkpoint: Path
    metrics: Path
    steps: int
    losses: List[float]

    @property
    def initial_loss(self) -> Optional[float]:
        return self.losses[0] if self.losses else None

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


@log_execution_time("workflows.train_lsm")
def train_lsm(config: ExperimentConfig, dataset: SyntheticDataset, out_dir: Union[str, Path],
              network: Optional[DetectorNetwork] = None) -> LSMResult:
    """Run ``config.lsm.steps`` SGD steps and write ``lsm.ckpt`` plus the metrics log."""
    set_stage("LSM")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    network = network or DetectorNetwork.for_dataset(config, dataset)
    network.table.group.set_trainable(config.model.embedding_mode != "frozen")

    lsm = config.lsm
    optimizer = SGD(network.groups(), momentum=lsm.schedule.momentum)
    schedule = StepDecaySchedule(lsm.schedule.base_rate, lsm.schedule.decay_steps, lsm.schedule.decay_factor)
    images = dataset.split("train")
    rng = np.random.default_rng([config.seed, _BATCH_STREAM])
    batch_size = min(lsm.batch_size, len(images))
    train_logger.info("Starting matching stage", steps=lsm.steps, batch_size=batch_size,
                      regions=config.regions.mode, box_source=config.regions.box_source)

    losses: List[float] = []
    metrics_path = out_dir / LSM_METRICS
    with MetricsLog(metrics_path, LSM_METRIC_KEYS) as metrics:
        for step in range(lsm.steps):
            chosen = rng.choice(len(images), size=batch_size, replace=False)
            batch = build_lsm_batch([images[i] for i in chosen], config.regions, dataset.known_ids)
            optimizer.zero_grad()
            terms = lsm_terms(network, batch, config.losses, rng)
            values = term_values(terms)
            if not all(math.isfinite(v) for v in values.values()):
                raise dump_nonfinite(network, "LSM", step, values, out_dir)
            total = lsm_total_loss(terms["grounding"], terms["icm"], terms["mlm"], terms["consistency"])
            backward(total)
            lr = schedule.rate(step)
            optimizer.step(lr)

            loss = total.item()
            losses.append(loss)
            metrics.write(stage="LSM", step=step, lr=lr, loss_total=loss, **values)
            log_training_step("LSM", step, lr, loss, values)
            if lsm.checkpoint_every and (step + 1) % lsm.checkpoint_every == 0 and step + 1 < lsm.steps:
                save_checkpoint(snapshot(network, "LSM", step + 1, optimizer), out_dir / f"lsm_step{step + 1:06d}.ckpt")

    path = save_checkpoint(snapshot(network, "LSM", lsm.steps, optimizer), out_dir / LSM_CHECKPOINT)
    train_logger.info("Matching stage finished", steps=lsm.steps,
                      initial_loss=losses[0] if losses else None, final_loss=losses[-1] if losses else None)
    return LSMResult(checkpoint=path, metrics=metrics_path, steps=lsm.steps, losses=losses)


__all__ = [
    'LSM_CHECKPOINT', 'LSM_METRICS', 'LSMBatch', 'LSMResult',
    'pad_captions', 'build_lsm_batch', 'lsm_terms', 'pre_fusion_targets', 'term_values', 'train_lsm',
]
