"""
Padded batches of one region kind.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Tensor
from ..utils.errors import LocovError


@dataclass
class RegionBatch:
    """B x R x dim features with a B x R validity mask; padding rows are zeros."""
    features: Tensor
    mask: np.ndarray
    kind: str = "box"

    def __post_init__(self):
        if self.features.ndim != 3 or self.mask.shape != self.features.shape[:2]:
            raise LocovError("shape-mismatch", f"features {self.features.shape} vs mask {self.mask.shape}")

    @property
    def batch_size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[-1]

    @property
    def counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def map(self, fn: Callable[[Tensor], Tensor]) -> "RegionBatch":
        return RegionBatch(fn(self.features), self.mask, self.kind)


def pad_regions(per_image: Sequence[np.ndarray], dim: int, kind: str = "box") -> RegionBatch:
    """Stack variable-length n_i x dim arrays into one padded batch."""
    if not per_image:
        raise LocovError("empty-side", "no images in region batch")
    width = max(1, max(len(f) for f in per_image))
    data = np.zeros((len(per_image), width, dim))
    mask = np.zeros((len(per_image), width), dtype=bool)
    for b, feats in enumerate(per_image):
        feats = np.asarray(feats, dtype=np.float64).reshape(-1, dim)
        data[b, :len(feats)] = feats
        mask[b, :len(feats)] = True
    return RegionBatch(Tensor(data), mask, kind)


__all__ = ['RegionBatch', 'pad_regions']
