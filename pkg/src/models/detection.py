"""
Detection-side records: boxes, ground truth, detections and class metadata.
"""

from typing import List, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..utils.errors import LocovError


BACKGROUND_ID = -1

Setup = Literal["novel", "known", "generalized"]
SETUPS: Sequence[str] = ("novel", "known", "generalized")


class Box(BaseModel):
    """Axis-aligned box in image coordinates."""
    model_config = ConfigDict(frozen=True)

    x1: float
    y1: float
    x2: float
    y2: float

    @model_validator(mode="after")
    def check_extent(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"invalid-box: degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})")
        return self

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Box":
        x1, y1, x2, y2 = (float(v) for v in values)
        try:
            return cls(x1=x1, y1=y1, x2=x2, y2=y2)
        except ValidationError as exc:
            raise LocovError("invalid-box", f"degenerate box {tuple(values)}") from exc

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def clamp(self, size: float) -> "Box":
        """Clip to [0, size]^2."""
        return Box(
            x1=min(max(self.x1, 0.0), size), y1=min(max(self.y1, 0.0), size),
            x2=min(max(self.x2, 0.0), size), y2=min(max(self.y2, 0.0), size),
        )


class GroundTruth(BaseModel):
    """Annotated object."""
    image_id: int
    box: Box
    class_id: int = Field(..., ge=0)


class Detection(BaseModel):
    """One detector output."""
    image_id: int
    box: Box
    class_id: int = Field(..., ge=0)
    confidence: float = Field(..., ge=0, le=1)


class ClassInfo(BaseModel):
    """A class name and its token ids."""
    class_id: int = Field(..., ge=0)
    name: str
    tokens: List[int] = Field(..., min_length=1)
    split: Literal["known", "novel"]


__all__ = [
    'BACKGROUND_ID', 'Setup', 'SETUPS',
    'Box', 'GroundTruth', 'Detection', 'ClassInfo',
]
