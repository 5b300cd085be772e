"""
Evaluation report models.
Field order is the serialised key order.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from .detection import Setup


IOU_THRESHOLDS: List[float] = [round(0.5 + 0.05 * i, 2) for i in range(10)]

# Generalized-minus-individual AP drop beyond which a class counts as confused
CONFUSION_DROP = 0.035


class ClassAP(BaseModel):
    """AP of one class at every IoU threshold."""
    class_id: int
    name: str
    split: str
    num_gt: int
    per_threshold: List[float]
    ap: float = Field(..., ge=0, le=1)
    ap50: float = Field(..., ge=0, le=1)
    ap75: float = Field(..., ge=0, le=1)


class SubsetSummary(BaseModel):
    """Aggregate over a subset of a block's classes."""
    ap: float
    ap50: float
    ap75: float
    num_classes: int


class SetupBlock(BaseModel):
    """One evaluation setup (novel, known or generalized)."""
    setup: Setup
    class_ids: List[int]
    num_detections: int
    per_threshold: List[float]
    ap: float = Field(..., ge=0, le=1)
    ap50: float = Field(..., ge=0, le=1)
    ap75: float = Field(..., ge=0, le=1)
    classes: List[ClassAP]
    subsets: Dict[str, SubsetSummary] = Field(default_factory=dict)


class ClassDelta(BaseModel):
    """Generalized AP minus the AP of the class's own constrained setup."""
    class_id: int
    name: str
    split: str
    individual_ap: float
    generalized_ap: float
    delta_ap: float
    individual_ap50: float
    generalized_ap50: float
    delta_ap50: float
    confused: bool


class EvalReport(BaseModel):
    """Full evaluation output."""
    iou_thresholds: List[float] = Field(default_factory=lambda: list(IOU_THRESHOLDS))
    blocks: Dict[str, SetupBlock] = Field(default_factory=dict)
    deltas: List[ClassDelta] = Field(default_factory=list)
    split: Optional[str] = None

    def block(self, setup: str) -> SetupBlock:
        return self.blocks[setup]


__all__ = [
    'IOU_THRESHOLDS', 'CONFUSION_DROP',
    'ClassAP', 'SubsetSummary', 'SetupBlock', 'ClassDelta', 'EvalReport',
]
