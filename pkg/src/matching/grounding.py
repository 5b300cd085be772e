"""
Fine-grained image-caption similarity and the symmetric grounding loss.

Similarity between an image and a caption averages, over regions, the
alignment-weighted dot products between the region and every caption
word. The weights are a per-region softmax over the caption's words.
"""

from typing import Literal, Optional

import numpy as np

from ..autodiff import Tensor, ops
from ..autodiff.ops import MASK_LOGIT
from ..regions.batching import RegionBatch
from ..utils.errors import LocovError
from ..utils.validators import require_square


Axis = Literal["image", "caption"]


def _check_pair(regions: Tensor, words: Tensor) -> None:
    if regions.ndim != 2 or words.ndim != 2:
        raise LocovError("shape-mismatch", f"expected n x D and m x D, got {regions.shape} and {words.shape}")
    if regions.shape[0] == 0 or words.shape[0] == 0:
        raise LocovError("empty-side", f"{regions.shape[0]} regions and {words.shape[0]} words")
    if regions.shape[1] != words.shape[1]:
        raise LocovError("shape-mismatch", f"region dimension {regions.shape[1]} vs word dimension {words.shape[1]}")


def alignment_weights(regions: Tensor, words: Tensor) -> Tensor:
    """|R| x |W| matrix; row i is softmax_j(r_i . w_j)."""
    _check_pair(regions, words)
    return ops.softmax(ops.matmul(regions, ops.transpose(words)), axis=1)


def image_caption_similarity(regions: Tensor, words: Tensor) -> Tensor:
    """Mean over regions of sum_j d_ij (r_i . w_j)."""
    _check_pair(regions, words)
    dots = ops.matmul(regions, ops.transpose(words))
    weights = ops.softmax(dots, axis=1)
    return ops.mean(ops.sum(weights * dots, axis=1))


def batch_similarity(regions: RegionBatch, words: Tensor, word_mask: np.ndarray) -> Tensor:
    """B x B matrix with entry (a, b) = sim(image a, caption b).

    Padded words get zero alignment weight; padded regions are left out
    of the mean. An image without regions of this kind scores 0 against
    every caption.
    """
    if words.ndim != 3 or word_mask.shape != words.shape[:2]:
        raise LocovError("shape-mismatch", f"words {words.shape} vs mask {word_mask.shape}")
    if regions.batch_size != words.shape[0]:
        raise LocovError("shape-mismatch", f"{regions.batch_size} images vs {words.shape[0]} captions")
    if regions.dim != words.shape[-1]:
        raise LocovError("shape-mismatch", f"region dimension {regions.dim} vs word dimension {words.shape[-1]}")
    if not word_mask.any(axis=1).all():
        raise LocovError("empty-side", "a caption in the batch has no words")

    b, r, d = regions.features.shape
    w = words.shape[1]
    # (B, 1, R, D) @ (1, B, D, W) -> (B_img, B_cap, R, W)
    left = ops.reshape(regions.features, (b, 1, r, d))
    right = ops.reshape(ops.swapaxes(words, 1, 2), (1, b, d, w))
    dots = ops.matmul(left, right)
    padded_words = ~word_mask[None, :, None, :]
    weights = ops.softmax(ops.masked_fill(dots, padded_words, MASK_LOGIT), axis=-1)
    per_region = ops.sum(weights * ops.masked_fill(dots, padded_words, 0.0), axis=-1)
    region_mask = regions.mask[:, None, :].astype(np.float64)
    counts = np.maximum(regions.mask.sum(axis=1), 1).astype(np.float64)[:, None]
    return ops.sum(per_region * region_mask, axis=-1) / counts


def grounding_loss(similarity: Tensor, axis: Axis = "image") -> Tensor:
    """Batch mean of -log softmax at the matched pair.

    ``image``: each image chooses among the batch's captions (row softmax).
    ``caption``: each caption chooses among the batch's images (column softmax).
    """
    require_square(similarity.shape, "similarity matrix")
    if axis not in ("image", "caption"):
        raise LocovError("invalid-config", f"unknown grounding axis {axis!r}")
    log_probs = ops.log_softmax(similarity, axis=1 if axis == "image" else 0)
    return -ops.mean(ops.diagonal(log_probs))


def total_grounding_loss(box_batch: Optional[Tensor], grid_batch: Optional[Tensor]) -> Tensor:
    """Both axes for each region kind that is present, summed."""
    present = [s for s in (box_batch, grid_batch) if s is not None]
    if not present:
        raise LocovError("empty-side", "neither box nor grid similarities given")
    if len(present) == 2 and box_batch.shape != grid_batch.shape:
        raise LocovError("shape-mismatch", f"box batch {box_batch.shape} vs grid batch {grid_batch.shape}")
    total = None
    for similarity in present:
        for axis in ("caption", "image"):
            term = grounding_loss(similarity, axis)
            total = term if total is None else total + term
    return total


__all__ = [
    'Axis', 'alignment_weights', 'image_caption_similarity', 'batch_similarity',
    'grounding_loss', 'total_grounding_loss',
]
