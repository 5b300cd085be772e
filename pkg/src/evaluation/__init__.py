"""
IoU, average precision and the three-setup evaluation protocol.
"""

from .geometry import iou, pairwise_iou, nms
from .metrics import (
    match_detections, ap_from_flags, average_precision,
    evaluate_setup, class_deltas, evaluate,
)
from .oracle import brute_force_average_precision, brute_force_evaluate
from .export import CSV_COLUMNS, write_report_json, read_report_json, write_report_csv

__all__ = [
    'iou', 'pairwise_iou', 'nms',
    'match_detections', 'ap_from_flags', 'average_precision',
    'evaluate_setup', 'class_deltas', 'evaluate',
    'brute_force_average_precision', 'brute_force_evaluate',
    'CSV_COLUMNS', 'write_report_json', 'read_report_json', 'write_report_csv',
]
