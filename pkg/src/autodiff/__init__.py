"""
Minimal reverse-mode differentiation engine.
"""

from .tensor import Tensor, ComputationRecord, RecordEntry, backward, parameter, as_tensor
from . import ops
from .ops import softmax, log_softmax, kl_divergence, KL_EPSILON
from .gradcheck import finite_difference_gradient, compare_gradients, relative_error
from .optim import ParameterGroup, SGD, StepDecaySchedule, parameter_checksum

__all__ = [
    'Tensor', 'ComputationRecord', 'RecordEntry', 'backward', 'parameter', 'as_tensor',
    'ops', 'softmax', 'log_softmax', 'kl_divergence', 'KL_EPSILON',
    'finite_difference_gradient', 'compare_gradients', 'relative_error',
    'ParameterGroup', 'SGD', 'StepDecaySchedule', 'parameter_checksum',
]
