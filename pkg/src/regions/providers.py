"""
Region providers: box-region selection from scored proposals and
grid-region construction from a backbone-style feature map.
"""

from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import Tensor
from ..models.detection import Box
from ..utils.errors import LocovError


RegionKind = Literal["box", "grid"]

DEFAULT_OBJECTNESS_THRESHOLD = 0.7
DEFAULT_BOX_CAP = 100


@dataclass
class Proposal:
    """Scored candidate box with its raw feature vector."""
    box: Box
    score: float
    feature: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise LocovError("invalid-config", f"objectness {self.score} outside [0, 1]")


@dataclass
class GridRegion:
    """One grid cell; ``index`` is (row, col)."""
    index: Tuple[int, int]
    feature: np.ndarray


def select_box_regions(proposals: Sequence[Proposal], threshold: float = DEFAULT_OBJECTNESS_THRESHOLD,
                       cap: int = DEFAULT_BOX_CAP) -> List[Proposal]:
    """Keep score > threshold, highest first, at most ``cap``; ties keep input order."""
    if cap < 1:
        raise LocovError("invalid-config", "box-region cap must be at least 1")
    kept = [(i, p) for i, p in enumerate(proposals) if p.score > threshold]
    kept.sort(key=lambda item: (-item[1].score, item[0]))
    return [p for _, p in kept[:cap]]


def select_box_indices(scores: np.ndarray, threshold: float = DEFAULT_OBJECTNESS_THRESHOLD,
                       cap: int = DEFAULT_BOX_CAP) -> np.ndarray:
    """Array form of :func:`select_box_regions` returning input indices."""
    if cap < 1:
        raise LocovError("invalid-config", "box-region cap must be at least 1")
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.flatnonzero(scores > threshold)
    # lexsort: last key is primary
    order = np.lexsort((candidates, -scores[candidates]))
    return candidates[order][:cap]


def make_grid_regions(feature_map: np.ndarray) -> List[GridRegion]:
    """G x G x F map to G*G regions in row-major order."""
    feature_map = np.asarray(feature_map, dtype=np.float64)
    if feature_map.ndim != 3 or feature_map.shape[0] != feature_map.shape[1] or feature_map.shape[0] < 1:
        raise LocovError("shape-mismatch", f"grid feature map must be G x G x F, got {feature_map.shape}")
    g = feature_map.shape[0]
    return [GridRegion(index=(r, c), feature=feature_map[r, c].copy()) for r in range(g) for c in range(g)]


@dataclass
class RegionSet:
    """Box- and grid-regions of one image, kept separate per kind."""
    image_id: int
    box_features: Tensor
    boxes: np.ndarray
    box_scores: np.ndarray
    grid_features: Tensor
    grid_index: np.ndarray
    kinds: Tuple[RegionKind, ...] = ("box", "grid")
    cap: Optional[int] = None

    def __post_init__(self):
        dims = {t.shape[-1] for t in (self.box_features, self.grid_features) if t.shape[0] > 0}
        if len(dims) > 1:
            raise LocovError("shape-mismatch", f"region feature dimensions differ: {sorted(dims)}")
        if self.cap is not None and self.box_features.shape[0] > self.cap:
            raise LocovError("invalid-config", f"{self.box_features.shape[0]} box regions exceed cap {self.cap}")

    @property
    def dim(self) -> int:
        return self.box_features.shape[-1] if self.box_features.shape[0] else self.grid_features.shape[-1]

    @property
    def grid_size(self) -> int:
        return int(round(np.sqrt(self.grid_features.shape[0])))

    def features(self, kind: RegionKind) -> Tensor:
        if kind not in self.kinds:
            raise LocovError("empty-side", f"region set has no {kind} regions")
        return self.box_features if kind == "box" else self.grid_features

    def box_regions(self) -> List[Tuple[Box, np.ndarray, float]]:
        return [
            (Box.from_array(b), self.box_features.data[i], float(self.box_scores[i]))
            for i, b in enumerate(self.boxes)
        ]

    def with_features(self, box_features: Tensor, grid_features: Tensor) -> "RegionSet":
        """Same geometry, new features (e.g. after projection)."""
        return RegionSet(
            image_id=self.image_id, box_features=box_features, boxes=self.boxes,
            box_scores=self.box_scores, grid_features=grid_features,
            grid_index=self.grid_index, kinds=self.kinds, cap=self.cap,
        )


def build_region_set(image_id: int, box_regions: Sequence[Proposal], grid_regions: Sequence[GridRegion],
                     kinds: Tuple[RegionKind, ...] = ("box", "grid"), cap: Optional[int] = None) -> RegionSet:
    """Assemble a RegionSet from selected proposals and grid cells."""
    dim = None
    for item in list(box_regions) + list(grid_regions):
        dim = item.feature.shape[-1] if dim is None else dim
    dim = dim or 0
    box_feats = np.array([p.feature for p in box_regions], dtype=np.float64).reshape(len(box_regions), dim)
    boxes = np.array([p.box.as_array() for p in box_regions], dtype=np.float64).reshape(len(box_regions), 4)
    scores = np.array([p.score for p in box_regions], dtype=np.float64)
    grid_feats = np.array([g.feature for g in grid_regions], dtype=np.float64).reshape(len(grid_regions), dim)
    grid_index = np.array([g.index for g in grid_regions], dtype=np.int64).reshape(len(grid_regions), 2)
    return RegionSet(
        image_id=image_id, box_features=Tensor(box_feats), boxes=boxes, box_scores=scores,
        grid_features=Tensor(grid_feats), grid_index=grid_index, kinds=kinds, cap=cap,
    )


__all__ = [
    'RegionKind', 'Proposal', 'GridRegion', 'RegionSet',
    'DEFAULT_OBJECTNESS_THRESHOLD', 'DEFAULT_BOX_CAP',
    'select_box_regions', 'select_box_indices', 'make_grid_regions', 'build_region_set',
]
