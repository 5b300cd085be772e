"""
Caption, class and region encoding into the shared D-dimensional space.
"""

from typing import Sequence, Tuple

import numpy as np

from ..autodiff import Tensor, ops
from ..regions.providers import RegionSet
from ..utils.errors import LocovError
from .layers import EmbeddingTable, ProjectionLayer
from .vocabulary import PAD_ID


def embed_caption(tokens: Sequence[int], table: EmbeddingTable) -> Tensor:
    """One row per non-padding token, in caption order."""
    ids = np.asarray([int(t) for t in tokens if int(t) != PAD_ID], dtype=np.int64)
    if ids.size == 0:
        raise LocovError("empty-side", "caption is empty after padding removal")
    return table.rows(ids)


def class_embedding(class_tokens: Sequence[int], table: EmbeddingTable) -> Tensor:
    """Mean of the constituent token vectors."""
    if len(class_tokens) == 0:
        raise LocovError("empty-class-name", "class has no tokens")
    rows = table.rows(np.asarray(class_tokens, dtype=np.int64))
    return ops.mean(rows, axis=0)


def project_regions(raw: RegionSet, proj: ProjectionLayer) -> RegionSet:
    """Map every region feature affinely into D; geometry is untouched."""
    if raw.dim != proj.in_dim:
        raise LocovError("shape-mismatch", f"region dimension {raw.dim} vs projection input {proj.in_dim}")

    def _map(features: Tensor) -> Tensor:
        if features.shape[0] == 0:
            return Tensor(np.zeros((0, proj.out_dim)))
        return proj(features)

    return raw.with_features(_map(raw.box_features), _map(raw.grid_features))


def embed_padded(ids: np.ndarray, table: EmbeddingTable) -> Tuple[Tensor, np.ndarray]:
    """B x W padded ids to (B x W x D embeddings, B x W validity mask)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2:
        raise LocovError("shape-mismatch", f"padded caption ids must be B x W, got {ids.shape}")
    mask = ids != PAD_ID
    if not mask.any(axis=1).all():
        raise LocovError("empty-side", "a caption in the batch is empty after padding removal")
    return table.rows(ids), mask


__all__ = ['embed_caption', 'class_embedding', 'project_regions', 'embed_padded']
