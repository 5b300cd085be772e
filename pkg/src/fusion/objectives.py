"""
Matching-stage objectives built on the fusion model: image-caption
matching, masked-token reconstruction, pre/post-fusion consistency and
their unweighted total.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..autodiff import Tensor, ops
from ..embeddings.layers import EmbeddingTable
from ..embeddings.vocabulary import MASK_ID, PAD_ID
from ..matching.grounding import grounding_loss
from ..regions.batching import RegionBatch
from ..utils.errors import LocovError
from ..utils.validators import require_finite, require_shape, require_square
from .model import CrossAttentionModel


DEFAULT_MASK_RATIO = 0.15

Scalar = Union[Tensor, float]


def icm_loss(fused_scores: Tensor) -> Tensor:
    """Mean of the image-axis and caption-axis contrastive losses over fused scores."""
    return (grounding_loss(fused_scores, "image") + grounding_loss(fused_scores, "caption")) * 0.5


def match_distribution(scores: Tensor) -> Tensor:
    """Row a is the softmax over the batch's captions for image a."""
    require_square(scores.shape, "score matrix")
    return ops.softmax(scores, axis=1)


@dataclass
class MaskedBatch:
    """Caption ids with a subset replaced by the mask id."""
    ids: np.ndarray
    positions: np.ndarray
    originals: np.ndarray

    def __post_init__(self):
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise LocovError("shape-mismatch", f"mask positions must be N x 2, got {self.positions.shape}")
        if len(self.positions) != len(self.originals):
            raise LocovError("shape-mismatch", "one original id per masked position")
        if len({tuple(p) for p in self.positions.tolist()}) != len(self.positions):
            raise LocovError("empty-mask", "mask positions are not distinct")

    @property
    def num_masked(self) -> int:
        return len(self.positions)


def mask_tokens(ids: np.ndarray, rng: np.random.Generator, ratio: float = DEFAULT_MASK_RATIO) -> MaskedBatch:
    """Mask ``ratio`` of the batch's non-padding tokens uniformly, at least one."""
    ids = np.asarray(ids, dtype=np.int64)
    candidates = np.argwhere(ids != PAD_ID)
    if len(candidates) == 0:
        raise LocovError("empty-mask", "batch has no tokens to mask")
    count = min(len(candidates), max(1, int(round(ratio * len(candidates)))))
    chosen = np.sort(rng.choice(len(candidates), size=count, replace=False))
    positions = candidates[chosen]
    masked = ids.copy()
    originals = ids[positions[:, 0], positions[:, 1]].copy()
    masked[positions[:, 0], positions[:, 1]] = MASK_ID
    return MaskedBatch(ids=masked, positions=positions, originals=originals)


def token_nll(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax of N x V logits."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != len(targets):
        raise LocovError("shape-mismatch", f"logits {logits.shape} for {len(targets)} targets")
    if len(targets) == 0:
        raise LocovError("empty-mask", "no masked positions")
    log_probs = ops.log_softmax(logits, axis=1)
    return -ops.mean(log_probs[np.arange(len(targets)), targets])


def mlm_loss(masked: MaskedBatch, regions: RegionBatch, model: CrossAttentionModel,
             table: EmbeddingTable) -> Tensor:
    """Reconstruct masked tokens from states fused with each caption's own image."""
    if masked.num_masked == 0:
        raise LocovError("empty-mask", "no masked positions")
    words = table.rows(masked.ids)
    word_mask = masked.ids != PAD_ID
    hidden, _ = model.forward(regions.features, regions.mask, words, word_mask, pairing="diagonal")
    # hidden: (B, 1, W, D)
    picked = hidden[masked.positions[:, 0], 0, masked.positions[:, 1]]
    return token_nll(model.token_logits(picked, table.weight), masked.originals)


def consistency_loss(p_box: Optional[Tensor], p_grid: Optional[Tensor],
                     q_box: Optional[Tensor], q_grid: Optional[Tensor],
                     bidirectional: bool = False) -> Tensor:
    """KL(p_box || q_box) + KL(p_grid || q_grid) + KL(p_grid || q_box).

    Distributions run along the last axis; leading axes (one row per
    image) are averaged. p is a fixed target unless ``bidirectional``.
    With one region kind only its aligned term remains.
    """
    def target(p: Tensor) -> Tensor:
        return p if bidirectional else p.detach()

    pairs = []
    if p_box is not None and q_box is not None:
        pairs.append((p_box, q_box))
    if p_grid is not None and q_grid is not None:
        pairs.append((p_grid, q_grid))
    if p_grid is not None and q_box is not None:
        pairs.append((p_grid, q_box))
    if not pairs:
        raise LocovError("empty-side", "no pre/post-fusion distribution pairs")

    total = None
    for p, q in pairs:
        require_shape(q.shape, p.shape, "post-fusion distribution")
        term = ops.mean(ops.kl_divergence(target(p), q, axis=-1))
        total = term if total is None else total + term
    return total


def lsm_total_loss(l_g: Scalar, l_icm: Scalar, l_mlm: Scalar, l_cons: Scalar) -> Tensor:
    """Unweighted sum of the four matching-stage losses."""
    total = None
    for name, term in (("grounding", l_g), ("icm", l_icm), ("mlm", l_mlm), ("consistency", l_cons)):
        value = term.data if isinstance(term, Tensor) else np.asarray(term, dtype=np.float64)
        require_finite(np.ravel(value), f"{name} loss")
        total = term if total is None else total + term
    return total if isinstance(total, Tensor) else Tensor(total)


__all__ = [
    'DEFAULT_MASK_RATIO', 'MaskedBatch', 'icm_loss', 'match_distribution', 'mask_tokens',
    'token_nll', 'mlm_loss', 'consistency_loss', 'lsm_total_loss',
]
