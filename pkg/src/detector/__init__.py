"""
Task tuning: background-aware classification, freezing and inference.
"""

from .catalog import ClassSet, SETUP_CLASS_SET, ClassCatalog
from .classifier import (
    classify_regions, classify_region, stt_targets, stt_loss, STTBatch, stt_train_step,
)
from .freezing import apply_freeze_policy, group_checksums
from .inference import DEFAULT_SCORE_THRESHOLD, DEFAULT_NMS_IOU, region_probabilities, detect

__all__ = [
    'ClassSet', 'SETUP_CLASS_SET', 'ClassCatalog',
    'classify_regions', 'classify_region', 'stt_targets', 'stt_loss', 'STTBatch', 'stt_train_step',
    'apply_freeze_policy', 'group_checksums',
    'DEFAULT_SCORE_THRESHOLD', 'DEFAULT_NMS_IOU', 'region_probabilities', 'detect',
]
