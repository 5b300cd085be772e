"""
Parameter groups, SGD with momentum and the step-decay learning-rate schedule.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class ParameterGroup:
    """Named tensors that freeze and train together."""
    name: str
    params: Dict[str, Tensor]
    trainable: bool = True

    def tensors(self) -> List[Tensor]:
        return list(self.params.values())

    def set_trainable(self, trainable: bool) -> None:
        """Frozen tensors stop recording; gradients still reach inputs upstream of them."""
        self.trainable = trainable
        for tensor in self.params.values():
            tensor.requires_grad = trainable
            tensor.zero_grad()

    def checksum(self) -> str:
        return parameter_checksum(self)


def parameter_checksum(group: ParameterGroup) -> str:
    """SHA-256 over names, shapes and float64 bytes, in name order."""
    digest = hashlib.sha256()
    for name in sorted(group.params):
        tensor = group.params[name]
        digest.update(name.encode("utf-8"))
        digest.update(str(tensor.shape).encode("ascii"))
        digest.update(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    return digest.hexdigest()


@dataclass
class StepDecaySchedule:
    """base_rate / factor ** (number of decay steps already reached)."""
    base_rate: float
    decay_steps: Sequence[int] = ()
    decay_factor: float = 10.0

    def rate(self, step: int) -> float:
        passed = sum(1 for s in self.decay_steps if step >= s)
        return self.base_rate / (self.decay_factor ** passed)


@dataclass
class SGD:
    """Stochastic gradient descent with heavy-ball momentum."""
    groups: List[ParameterGroup]
    momentum: float = 0.9
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    def _key(self, group: ParameterGroup, name: str) -> str:
        return f"{group.name}.{name}"

    def zero_grad(self) -> None:
        for group in self.groups:
            for tensor in group.params.values():
                tensor.zero_grad()

    def step(self, lr: float) -> None:
        """v <- mu * v + g ; theta <- theta - lr * v, trainable groups only."""
        for group in self.groups:
            if not group.trainable:
                continue
            for name, tensor in group.params.items():
                if tensor.grad is None:
                    continue
                key = self._key(group, name)
                v = self.velocity.get(key)
                v = tensor.grad.copy() if v is None else self.momentum * v + tensor.grad
                self.velocity[key] = v
                tensor.data -= lr * v
        self.zero_grad()

    def state(self) -> Dict[str, np.ndarray]:
        return dict(self.velocity)

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        self.velocity = {k: np.array(v, dtype=np.float64) for k, v in state.items()}


def all_tensors(groups: Iterable[ParameterGroup], trainable_only: bool = False) -> Dict[str, Tensor]:
    """Flatten groups to ``group.param`` keyed tensors."""
    out: Dict[str, Tensor] = {}
    for group in groups:
        if trainable_only and not group.trainable:
            continue
        for name, tensor in group.params.items():
            out[f"{group.name}.{name}"] = tensor
    return out


__all__ = [
    'ParameterGroup',
    'parameter_checksum',
    'StepDecaySchedule',
    'SGD',
    'all_tensors',
]
