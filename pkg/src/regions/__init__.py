"""
Box-region and grid-region providers.
"""

from .providers import (
    RegionKind, Proposal, GridRegion, RegionSet,
    DEFAULT_OBJECTNESS_THRESHOLD, DEFAULT_BOX_CAP,
    select_box_regions, select_box_indices, make_grid_regions, build_region_set,
)
from .batching import RegionBatch, pad_regions

__all__ = [
    'RegionKind', 'Proposal', 'GridRegion', 'RegionSet',
    'DEFAULT_OBJECTNESS_THRESHOLD', 'DEFAULT_BOX_CAP',
    'select_box_regions', 'select_box_indices', 'make_grid_regions', 'build_region_set',
    'RegionBatch', 'pad_regions',
]
