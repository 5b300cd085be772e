"""
The full detector as one bundle of parameter groups.

Both training stages and evaluation go through :class:`DetectorNetwork`:
it owns the embedding table, the residual region encoder, the projection
layer, the cross-attention model and the class catalog, and turns a
synthetic image into raw or projected region sets.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..autodiff import ParameterGroup, Tensor
from ..autodiff.optim import all_tensors
from ..detector.catalog import ClassCatalog
from ..embeddings.layers import EmbeddingTable, ProjectionLayer, RegionEncoder
from ..embeddings.vocabulary import Vocabulary
from ..fusion.model import CrossAttentionModel
from ..models.detection import ClassInfo
from ..models.experiment import ExperimentConfig, RegionConfig
from ..regions.batching import RegionBatch, pad_regions
from ..regions.providers import RegionSet, select_box_indices
from ..synthworld.world import SyntheticDataset, SyntheticImage
from ..utils.errors import LocovError
from ..utils.validators import require_nonempty
from ..utils.logger import engine_logger


# Seed streams; the pretrained-like table depends on the world only
_TABLE_STREAM = 11
_SCRATCH_STREAM = 12


def _table_rng(config: ExperimentConfig, world_seed: Optional[int]) -> np.random.Generator:
    if config.model.embedding_mode == "scratch":
        return np.random.default_rng([config.seed, _SCRATCH_STREAM])
    return np.random.default_rng([config.world.seed if world_seed is None else world_seed, _TABLE_STREAM])


@dataclass
class DetectorNetwork:
    config: ExperimentConfig
    table: EmbeddingTable
    encoder: RegionEncoder
    projection: ProjectionLayer
    fusion: CrossAttentionModel
    catalog: ClassCatalog

    @classmethod
    def build(cls, config: ExperimentConfig, vocabulary: Vocabulary, classes: Sequence[ClassInfo],
              feature_dim: Optional[int] = None, max_words: Optional[int] = None,
              world_seed: Optional[int] = None) -> "DetectorNetwork":
        """Fresh parameters, deterministic under ``config.seed``."""
        model = config.model
        feature_dim = feature_dim or config.world.feature_dim
        max_words = max_words or config.world.caption_max
        table = EmbeddingTable.initialise(
            len(vocabulary), model.embed_dim, model.embedding_std, _table_rng(config, world_seed),
            trainable=model.embedding_mode != "frozen",
        )
        rng = np.random.default_rng(config.seed)
        encoder = RegionEncoder.initialise(feature_dim, model.encoder_stages, model.init_std, rng)
        projection = ProjectionLayer.initialise(feature_dim, model.embed_dim, rng)
        fusion = CrossAttentionModel(
            model.embed_dim, model.fusion_layers, model.fusion_heads, model.ffn_dim,
            max_words, rng, init_std=model.init_std,
        )
        engine_logger.debug(
            "Built detector network", embed_dim=model.embed_dim, vocab=len(vocabulary),
            embedding_mode=model.embedding_mode, fusion_layers=model.fusion_layers,
        )
        return cls(config, table, encoder, projection, fusion, ClassCatalog(list(classes), table))

    @classmethod
    def for_dataset(cls, config: ExperimentConfig, dataset: SyntheticDataset) -> "DetectorNetwork":
        return cls.build(config, dataset.vocabulary, dataset.classes,
                         dataset.config.feature_dim, dataset.config.caption_max, dataset.config.seed)

    # ------------------------------------------------------------------ #
    def groups(self) -> List[ParameterGroup]:
        return [self.table.group, *self.encoder.groups, self.projection.group, self.fusion.group]

    def stt_groups(self) -> List[ParameterGroup]:
        """Groups the task-tuning loss reaches; the fusion model is not among them."""
        return [self.table.group, *self.encoder.groups, self.projection.group]

    def group(self, name: str) -> ParameterGroup:
        for g in self.groups():
            if g.name == name:
                return g
        raise LocovError("invalid-config", f"no parameter group {name!r}")

    def state(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in all_tensors(self.groups()).items()}

    def load_state(self, params: Dict[str, np.ndarray]) -> None:
        """Copy values in place; names and shapes must match exactly."""
        tensors = all_tensors(self.groups())
        missing = sorted(set(tensors) - set(params))
        extra = sorted(set(params) - set(tensors))
        if missing or extra:
            raise LocovError("shape-mismatch", f"checkpoint lacks {missing[:3]} and has unexpected {extra[:3]}")
        for name, tensor in tensors.items():
            values = np.asarray(params[name], dtype=np.float64)
            if values.shape != tensor.shape:
                raise LocovError("shape-mismatch", f"{name}: checkpoint {values.shape} vs model {tensor.shape}")
            tensor.data[...] = values

    # ------------------------------------------------------------------ #
    def encode(self, raw: Tensor) -> Tensor:
        """Encoder stages then projection, for any leading shape."""
        return self.projection(self.encoder(raw))

    def encode_batch(self, batch: RegionBatch) -> RegionBatch:
        return batch.map(self.encode)

    def encode_regions(self, raw: RegionSet) -> RegionSet:
        def _map(features: Tensor) -> Tensor:
            if features.shape[0] == 0:
                return Tensor(np.zeros((0, self.projection.out_dim)))
            return self.encode(features)

        return raw.with_features(_map(raw.box_features), _map(raw.grid_features))


# ---------------------------------------------------------------------- #
def _box_source(image: SyntheticImage, regions: RegionConfig, known_ids: Sequence[int]):
    """(boxes, scores, features) feeding the matching stage."""
    if regions.box_source == "proposals":
        keep = select_box_indices(image.proposal_scores, regions.objectness_threshold, regions.box_cap)
        return image.proposal_boxes[keep], image.proposal_scores[keep], image.proposal_features[keep]
    boxes = np.concatenate([image.gt_boxes, image.unlabelled_boxes]).reshape(-1, 4)
    features = np.concatenate([image.gt_features, image.unlabelled_features]).reshape(-1, image.gt_features.shape[-1])
    classes = image.all_classes
    if regions.box_source == "ann_known":
        chosen = np.isin(classes, np.asarray(known_ids, dtype=np.int64))
        boxes, features = boxes[chosen], features[chosen]
    boxes, features = boxes[:regions.box_cap], features[:regions.box_cap]
    return boxes, np.ones(len(boxes)), features


def image_regions(image: SyntheticImage, regions: RegionConfig, known_ids: Sequence[int]) -> RegionSet:
    """Raw region set of one image for the matching stage."""
    kinds = tuple(k for k, on in (("box", regions.use_box), ("grid", regions.use_grid)) if on)
    dim = image.grid_features.shape[-1]
    if regions.use_box:
        boxes, scores, features = _box_source(image, regions, known_ids)
    else:
        boxes, scores, features = np.zeros((0, 4)), np.zeros(0), np.zeros((0, dim))
    if regions.use_grid:
        g = image.grid_features.shape[0]
        grid = image.grid_features.reshape(g * g, dim)
        index = np.array([(r, c) for r in range(g) for c in range(g)], dtype=np.int64)
    else:
        grid, index = np.zeros((0, dim)), np.zeros((0, 2), dtype=np.int64)
    return RegionSet(
        image_id=image.image_id, box_features=Tensor(features.reshape(-1, dim)), boxes=boxes.reshape(-1, 4),
        box_scores=scores, grid_features=Tensor(grid), grid_index=index, kinds=kinds, cap=regions.box_cap,
    )


def detection_regions(image: SyntheticImage, regions: RegionConfig) -> RegionSet:
    """Raw proposals above the objectness threshold, at most ``box_cap``."""
    keep = select_box_indices(image.proposal_scores, regions.objectness_threshold, regions.box_cap)
    dim = image.proposal_features.shape[-1]
    return RegionSet(
        image_id=image.image_id, box_features=Tensor(image.proposal_features[keep].reshape(-1, dim)),
        boxes=image.proposal_boxes[keep].reshape(-1, 4), box_scores=image.proposal_scores[keep],
        grid_features=Tensor(np.zeros((0, dim))), grid_index=np.zeros((0, 2), dtype=np.int64),
        kinds=("box",), cap=regions.box_cap,
    )


def raw_region_batches(sets: Sequence[RegionSet]) -> Dict[str, RegionBatch]:
    """Padded raw batches per region kind present in the sets."""
    require_nonempty(sets, "empty-side", "region batch")
    dim = sets[0].dim
    out = {}
    for kind in sets[0].kinds:
        per_image = [
            (s.box_features if kind == "box" else s.grid_features).data for s in sets
        ]
        out[kind] = pad_regions(per_image, dim, kind)
    return out


__all__ = [
    'DetectorNetwork', 'image_regions', 'detection_regions', 'raw_region_batches',
]
