"""
Seeded generator of synthetic open-vocabulary detection worlds.

Every class owns a latent prototype on the unit sphere. Raw region
features are an affine scramble of the prototype into F dimensions plus
Gaussian noise, so the projection layer has a real map to learn.
Background regions are noise around the scramble of the origin.

Images carry ground-truth boxes, scored proposals (a jittered copy of
every object plus pure-noise boxes), a G x G grid feature map and a
caption that names every object's class among distractor words. The
train split keeps novel objects out of the labels; they survive only in
the caption and in ``unlabelled_*`` (used by the annotated-region oracle).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..embeddings.vocabulary import Vocabulary
from ..evaluation.geometry import iou, pairwise_iou
from ..models.detection import Box, ClassInfo, GroundTruth
from ..models.experiment import WorldConfig
from ..regions.providers import Proposal
from ..utils.errors import ConfigError
from ..utils.logger import engine_logger


SPLITS: Tuple[str, ...] = ("train", "val", "test")

# Objectness ranges for object-centred and pure-noise proposals
OBJECT_SCORE_RANGE = (0.75, 1.0)
NOISE_SCORE_RANGE = (0.0, 0.9)


@dataclass
class SyntheticImage:
    """One image as region features, boxes and a caption."""
    image_id: int
    gt_boxes: np.ndarray
    gt_classes: np.ndarray
    gt_features: np.ndarray
    unlabelled_boxes: np.ndarray
    unlabelled_classes: np.ndarray
    unlabelled_features: np.ndarray
    proposal_boxes: np.ndarray
    proposal_scores: np.ndarray
    proposal_features: np.ndarray
    grid_features: np.ndarray
    caption: np.ndarray

    def ground_truth(self) -> List[GroundTruth]:
        return [
            GroundTruth(image_id=self.image_id, box=Box.from_array(b), class_id=int(c))
            for b, c in zip(self.gt_boxes, self.gt_classes)
        ]

    def proposals(self) -> List[Proposal]:
        return [
            Proposal(box=Box.from_array(b), score=float(s), feature=f)
            for b, s, f in zip(self.proposal_boxes, self.proposal_scores, self.proposal_features)
        ]

    @property
    def all_boxes(self) -> np.ndarray:
        return np.concatenate([self.gt_boxes, self.unlabelled_boxes]).reshape(-1, 4)

    @property
    def all_classes(self) -> np.ndarray:
        return np.concatenate([self.gt_classes, self.unlabelled_classes]).astype(np.int64)


@dataclass
class SyntheticDataset:
    """Splits, classes, vocabulary and the prototypes that generated them."""
    config: WorldConfig
    classes: List[ClassInfo]
    vocabulary: Vocabulary
    splits: Dict[str, List[SyntheticImage]] = field(default_factory=dict)
    prototypes: np.ndarray = None
    raw_prototypes: np.ndarray = None

    def split(self, name: str) -> List[SyntheticImage]:
        if name not in self.splits:
            raise ConfigError(f"dataset has no split {name!r}", field="split")
        return self.splits[name]

    @property
    def known_ids(self) -> List[int]:
        return [c.class_id for c in self.classes if c.split == "known"]

    @property
    def novel_ids(self) -> List[int]:
        return [c.class_id for c in self.classes if c.split == "novel"]


def class_tokens(class_id: int, multi_token_every: int) -> List[str]:
    """``cNN``, split into ``cNN ##NN`` for every n-th class."""
    base = f"c{class_id:02d}"
    if multi_token_every and class_id % multi_token_every == multi_token_every - 1:
        return [base, f"##{class_id:02d}"]
    return [base]


def build_vocabulary(cfg: WorldConfig) -> Tuple[Vocabulary, List[List[str]], List[str]]:
    names = [class_tokens(c, cfg.multi_token_every) for c in range(cfg.num_classes)]
    distractors = [f"w{i:02d}" for i in range(cfg.distractor_tokens)]
    vocab = Vocabulary([t for name in names for t in name] + distractors)
    return vocab, names, distractors


def _jitter(box: np.ndarray, amount: float, size: float, rng: np.random.Generator) -> np.ndarray:
    w, h = box[2] - box[0], box[3] - box[1]
    shift = rng.uniform(-amount, amount, size=4) * np.array([w, h, w, h])
    out = np.clip(box + shift, 0.0, size)
    if out[2] - out[0] < 1e-3 or out[3] - out[1] < 1e-3:
        return box.copy()
    return out


class WorldGenerator:
    """Holds the world-level draws; images come from per-image seeds."""

    def __init__(self, cfg: WorldConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        latent = rng.normal(size=(cfg.num_classes, cfg.latent_dim))
        self.prototypes = latent / np.linalg.norm(latent, axis=1, keepdims=True)
        self.scramble = rng.normal(size=(cfg.feature_dim, cfg.latent_dim)) / np.sqrt(cfg.latent_dim) * np.sqrt(cfg.feature_dim)
        self.offset = rng.normal(scale=0.1, size=cfg.feature_dim)
        self.raw_prototypes = self.prototypes @ self.scramble.T + self.offset
        self.vocabulary, self.names, self.distractors = build_vocabulary(cfg)

    def classes(self) -> List[ClassInfo]:
        return [
            ClassInfo(
                class_id=c, name=" ".join(self.names[c]),
                tokens=[self.vocabulary.lookup(t) for t in self.names[c]],
                split="known" if c < self.cfg.num_known else "novel",
            )
            for c in range(self.cfg.num_classes)
        ]

    def _object_feature(self, class_id: int, rng: np.random.Generator) -> np.ndarray:
        return self.raw_prototypes[class_id] + self.cfg.noise_std * rng.normal(size=self.cfg.feature_dim)

    def _background_feature(self, rng: np.random.Generator, shape=()) -> np.ndarray:
        return self.offset + self.cfg.background_std * rng.normal(size=tuple(shape) + (self.cfg.feature_dim,))

    def _caption(self, classes: Sequence[int], rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        chunks = []
        for c in dict.fromkeys(int(c) for c in classes):
            chunks.append(self.names[c])
        used = sum(len(c) for c in chunks)
        length = max(int(rng.integers(cfg.caption_min, cfg.caption_max + 1)), used)
        for _ in range(length - used):
            chunks.append([self.distractors[int(rng.integers(len(self.distractors)))]])
        order = rng.permutation(len(chunks))
        return np.array([self.vocabulary.lookup(t) for i in order for t in chunks[i]], dtype=np.int64)

    def image(self, image_id: int, split: str, rng: np.random.Generator) -> SyntheticImage:
        cfg = self.cfg
        n = int(rng.integers(cfg.objects_min, cfg.objects_max + 1))
        classes = rng.integers(0, cfg.num_classes, size=n)
        sizes = rng.uniform(cfg.box_min, cfg.box_max, size=(n, 2))
        corners = rng.uniform(0.0, 1.0, size=(n, 2)) * (cfg.image_size - sizes)
        boxes = np.concatenate([corners, corners + sizes], axis=1)
        features = np.stack([self._object_feature(int(c), rng) for c in classes])

        # Proposals: one jittered copy per object, then pure noise
        p_boxes, p_scores, p_feats = [], [], []
        for box, c, feat in zip(boxes, classes, features):
            jittered = _jitter(box, cfg.box_jitter, cfg.image_size, rng)
            p_boxes.append(jittered)
            p_scores.append(rng.uniform(*OBJECT_SCORE_RANGE))
            p_feats.append(self._object_feature(int(c), rng) if iou(jittered, box) >= 0.5
                           else self._background_feature(rng))
        for _ in range(cfg.noise_proposals):
            size = rng.uniform(cfg.box_min * 0.5, cfg.box_max, size=2)
            corner = rng.uniform(0.0, 1.0, size=2) * (cfg.image_size - size)
            noise_box = np.concatenate([corner, corner + size])
            overlaps = pairwise_iou(noise_box, boxes)[0]
            best = int(np.argmax(overlaps))
            p_boxes.append(noise_box)
            p_scores.append(rng.uniform(*NOISE_SCORE_RANGE))
            p_feats.append(self._object_feature(int(classes[best]), rng) if overlaps[best] >= 0.5
                           else self._background_feature(rng))
        order = rng.permutation(len(p_boxes))

        # Grid cells average the prototypes of objects covering their centre
        g = cfg.grid_size
        centres = (np.arange(g) + 0.5) * cfg.image_size / g
        grid = self._background_feature(rng, (g, g))
        for row, cy in enumerate(centres):
            for col, cx in enumerate(centres):
                inside = (boxes[:, 0] <= cx) & (cx < boxes[:, 2]) & (boxes[:, 1] <= cy) & (cy < boxes[:, 3])
                if inside.any():
                    grid[row, col] = self.raw_prototypes[classes[inside]].mean(axis=0) + \
                        cfg.noise_std * rng.normal(size=cfg.feature_dim)

        caption = self._caption(classes, rng)
        labelled = np.ones(n, dtype=bool)
        if split == "train":
            labelled = classes < cfg.num_known
        return SyntheticImage(
            image_id=image_id,
            gt_boxes=boxes[labelled].reshape(-1, 4), gt_classes=classes[labelled].astype(np.int64),
            gt_features=features[labelled].reshape(-1, cfg.feature_dim),
            unlabelled_boxes=boxes[~labelled].reshape(-1, 4),
            unlabelled_classes=classes[~labelled].astype(np.int64),
            unlabelled_features=features[~labelled].reshape(-1, cfg.feature_dim),
            proposal_boxes=np.array(p_boxes)[order].reshape(-1, 4),
            proposal_scores=np.array(p_scores)[order],
            proposal_features=np.array(p_feats)[order].reshape(-1, cfg.feature_dim),
            grid_features=grid,
            caption=caption,
        )


def generate_world(cfg: Union[WorldConfig, dict]) -> SyntheticDataset:
    """Deterministic under ``cfg.seed``; image i of split s draws from seed (seed, s, i)."""
    if not isinstance(cfg, WorldConfig):
        try:
            cfg = WorldConfig.model_validate(cfg)
        except ValidationError as exc:
            first = exc.errors()[0] if exc.errors() else {}
            loc = ".".join(str(p) for p in first.get("loc", ())) or None
            raise ConfigError(first.get("msg", str(exc)), field=loc) from exc

    generator = WorldGenerator(cfg)
    counts = {"train": cfg.train_images, "val": cfg.val_images, "test": cfg.test_images}
    splits: Dict[str, List[SyntheticImage]] = {}
    next_id = 0
    for s_index, split in enumerate(SPLITS):
        images = []
        for i in range(counts[split]):
            rng = np.random.default_rng([cfg.seed, s_index, i])
            images.append(generator.image(next_id, split, rng))
            next_id += 1
        splits[split] = images

    engine_logger.info(
        "Generated synthetic world",
        seed=cfg.seed, known=cfg.num_known, novel=cfg.num_novel,
        images={k: len(v) for k, v in splits.items()},
    )
    return SyntheticDataset(
        config=cfg, classes=generator.classes(), vocabulary=generator.vocabulary, splits=splits,
        prototypes=generator.prototypes, raw_prototypes=generator.raw_prototypes,
    )


__all__ = [
    'SPLITS', 'OBJECT_SCORE_RANGE', 'NOISE_SCORE_RANGE',
    'SyntheticImage', 'SyntheticDataset', 'WorldGenerator',
    'class_tokens', 'build_vocabulary', 'generate_world',
]
