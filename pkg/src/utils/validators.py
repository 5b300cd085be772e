"""
Input validation utilities for the detection engine.
Guards shared by the loss functions, the detector and the evaluator.
"""

import math
from typing import Iterable, Sequence, Sized

from .errors import LocovError


def require_nonempty(items: Sized, code: str, what: str = "input") -> None:
    """Raise ``code`` when ``items`` has no elements."""
    if len(items) == 0:
        raise LocovError(code, f"{what} is empty")


def require_same_length(a: Sized, b: Sized, what: str = "inputs") -> None:
    """Both operands must have equal length."""
    if len(a) != len(b):
        raise LocovError("shape-mismatch", f"{what} have lengths {len(a)} and {len(b)}")


def require_shape(actual: Sequence[int], expected: Sequence[int], what: str = "tensor") -> None:
    """Exact shape check; ``-1`` in ``expected`` matches any extent."""
    if len(actual) != len(expected) or any(
        e != -1 and a != e for a, e in zip(actual, expected)
    ):
        raise LocovError("shape-mismatch", f"{what} has shape {tuple(actual)}, expected {tuple(expected)}")


def require_square(shape: Sequence[int], what: str = "matrix") -> None:
    if len(shape) != 2 or shape[0] != shape[1] or shape[0] < 1:
        raise LocovError("shape-mismatch", f"{what} must be square and non-empty, got {tuple(shape)}")


def require_finite(values: Iterable[float], what: str = "loss") -> None:
    """Raise ``non-finite-loss`` if any value is NaN or infinite."""
    for value in values:
        if not math.isfinite(float(value)):
            raise LocovError("non-finite-loss", f"{what} is not finite ({value})")


def require_unit_interval(value: float, what: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise LocovError("invalid-config", f"{what} must lie in [0, 1], got {value}")


__all__ = [
    'require_nonempty',
    'require_same_length',
    'require_shape',
    'require_square',
    'require_finite',
    'require_unit_interval',
]
