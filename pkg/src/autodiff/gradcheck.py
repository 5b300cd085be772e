"""
Finite-difference oracle for the reverse-mode engine.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from .tensor import Tensor, backward
from ..utils.errors import LocovError


DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4
DEFAULT_ABS_FLOOR = 1e-7

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def finite_difference_gradient(f: ScalarFn, x: Tensor, step: float = DEFAULT_STEP,
                               coords: Optional[np.ndarray] = None) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.

    ``x`` is perturbed in place and restored. When ``coords`` (flat
    indices) is given only those entries are estimated; the rest are NaN.
    """
    if step <= 0:
        raise LocovError("invalid-config", "finite-difference step must be positive")
    flat = x.data.reshape(-1)
    estimate = np.full(flat.shape, np.nan if coords is not None else 0.0)
    indices = range(flat.size) if coords is None else coords
    for i in indices:
        original = flat[i]
        flat[i] = original + step
        upper = _scalar(f(x))
        flat[i] = original - step
        lower = _scalar(f(x))
        flat[i] = original
        estimate[i] = (upper - lower) / (2.0 * step)
    return estimate.reshape(x.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   tolerance: float = DEFAULT_TOLERANCE,
                   abs_floor: float = DEFAULT_ABS_FLOOR) -> float:
    """Largest elementwise |a - n| / max(|a|, |n|, abs_floor / tolerance).

    A value at most ``tolerance`` means every entry is within the relative
    tolerance or within ``abs_floor`` absolutely.
    """
    mask = ~np.isnan(numeric)
    if not mask.any():
        return 0.0
    a, n = analytic[mask], numeric[mask]
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), abs_floor / tolerance)
    return float(np.max(np.abs(a - n) / denom))


@dataclass
class GradientComparison:
    """Result for one parameter tensor."""
    name: str
    max_rel_error: float
    passed: bool
    checked: int


def compare_gradients(
    loss_fn: Callable[[], Tensor],
    params: Dict[str, Tensor],
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    abs_floor: float = DEFAULT_ABS_FLOOR,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    corrupt: Optional[Callable[[str, np.ndarray], np.ndarray]] = None,
) -> List[GradientComparison]:
    """Backpropagate ``loss_fn()`` once and compare each parameter to finite differences.

    ``loss_fn`` must rebuild its graph from the current parameter values.
    ``max_coords`` limits the number of sampled entries per tensor.
    ``corrupt`` lets callers tamper with analytic gradients (negative controls).
    """
    for p in params.values():
        p.zero_grad()
    root = loss_fn()
    backward(root)

    rng = rng or np.random.default_rng(0)
    results = []
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        if corrupt is not None:
            analytic = corrupt(name, analytic)
        coords = None
        if max_coords is not None and p.size > max_coords:
            coords = rng.choice(p.size, size=max_coords, replace=False)
        numeric = finite_difference_gradient(lambda _x: loss_fn(), p, step=step, coords=coords)
        err = relative_error(analytic, numeric, tolerance, abs_floor)
        results.append(GradientComparison(
            name=name,
            max_rel_error=err,
            passed=err <= tolerance,
            checked=p.size if coords is None else len(coords),
        ))
    return results


__all__ = [
    'DEFAULT_STEP',
    'DEFAULT_TOLERANCE',
    'DEFAULT_ABS_FLOOR',
    'finite_difference_gradient',
    'relative_error',
    'compare_gradients',
    'GradientComparison',
]
