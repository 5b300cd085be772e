"""
Workflows: dataset generation, both training stages, evaluation,
the gradient suite and ablation sweeps.
"""

from .synth import synthesize
from .lsm import LSMBatch, LSMResult, build_lsm_batch, lsm_terms, train_lsm
from .stt import STTResult, build_stt_batch, stt_samples, train_stt
from .evaluate import detect_images, load_network, resolve_setups, run_evaluation, write_detections
from .gradcheck import CHECKS, GradcheckReport, GradcheckSettings, run_gradcheck
from .ablation import AblationRow, run_ablation

__all__ = [
    'synthesize',
    'LSMBatch', 'LSMResult', 'build_lsm_batch', 'lsm_terms', 'train_lsm',
    'STTResult', 'build_stt_batch', 'stt_samples', 'train_stt',
    'detect_images', 'load_network', 'resolve_setups', 'run_evaluation', 'write_detections',
    'CHECKS', 'GradcheckReport', 'GradcheckSettings', 'run_gradcheck',
    'AblationRow', 'run_ablation',
]
