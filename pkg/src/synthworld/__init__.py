"""
Synthetic open-vocabulary worlds.
"""

from .world import (
    SPLITS, SyntheticImage, SyntheticDataset, WorldGenerator,
    class_tokens, build_vocabulary, generate_world,
)
from .statistics import SplitStatistics, WorldStatistics, split_statistics, world_statistics

__all__ = [
    'SPLITS', 'SyntheticImage', 'SyntheticDataset', 'WorldGenerator',
    'class_tokens', 'build_vocabulary', 'generate_world',
    'SplitStatistics', 'WorldStatistics', 'split_statistics', 'world_statistics',
]
