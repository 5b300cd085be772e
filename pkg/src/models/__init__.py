"""
Models module for the detection engine.
Defines configuration, detection records and evaluation reports.
"""

from .detection import (
    BACKGROUND_ID, Setup, SETUPS, Box, GroundTruth, Detection, ClassInfo
)
from .experiment import (
    WorldConfig, ModelConfig, RegionConfig, LossToggles, ScheduleConfig,
    FreezePolicy, LSMConfig, STTConfig, AblationGrid, ExperimentConfig,
    parse_config, load_config
)
from .report import (
    IOU_THRESHOLDS, CONFUSION_DROP,
    ClassAP, SubsetSummary, SetupBlock, ClassDelta, EvalReport
)

__all__ = [
    # Detection
    'BACKGROUND_ID', 'Setup', 'SETUPS', 'Box', 'GroundTruth', 'Detection', 'ClassInfo',

    # Experiment
    'WorldConfig', 'ModelConfig', 'RegionConfig', 'LossToggles', 'ScheduleConfig',
    'FreezePolicy', 'LSMConfig', 'STTConfig', 'AblationGrid', 'ExperimentConfig',
    'parse_config', 'load_config',

    # Reports
    'IOU_THRESHOLDS', 'CONFUSION_DROP',
    'ClassAP', 'SubsetSummary', 'SetupBlock', 'ClassDelta', 'EvalReport'
]
