"""
Trainable layers shared by both stages: the word-embedding table, the
residual region encoder standing in for the backbone, and the projection
layer into the text-embedding space.
"""

from typing import Dict, List, Optional

import numpy as np

from ..autodiff import ParameterGroup, Tensor, ops, parameter
from ..utils.errors import LocovError


class EmbeddingTable:
    """V x D word vectors held as the ``embeddings`` parameter group."""

    GROUP = "embeddings"

    def __init__(self, weight: np.ndarray, trainable: bool = False):
        weight = np.asarray(weight, dtype=np.float64)
        if weight.ndim != 2:
            raise LocovError("shape-mismatch", f"embedding table must be V x D, got {weight.shape}")
        self.group = ParameterGroup(self.GROUP, {"weight": parameter(weight, name="embeddings.weight")})
        self.group.set_trainable(trainable)

    @classmethod
    def initialise(cls, vocab_size: int, dim: int, std: float, rng: np.random.Generator,
                   trainable: bool = False) -> "EmbeddingTable":
        return cls(rng.normal(0.0, std, size=(vocab_size, dim)), trainable=trainable)

    @property
    def weight(self) -> Tensor:
        return self.group.params["weight"]

    @property
    def vocab_size(self) -> int:
        return self.weight.shape[0]

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    @property
    def trainable(self) -> bool:
        return self.group.trainable

    def rows(self, ids: np.ndarray) -> Tensor:
        """Gather rows for an integer array of any shape."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            bad = ids[(ids < 0) | (ids >= self.vocab_size)][0]
            raise LocovError("unknown-token", f"id {int(bad)} outside 0..{self.vocab_size - 1}")
        return self.weight[ids]


class ProjectionLayer:
    """Affine map F -> D (weight F x D, bias D)."""

    GROUP = "projection"

    def __init__(self, weight: np.ndarray, bias: np.ndarray, trainable: bool = True):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[1],):
            raise LocovError("shape-mismatch", f"projection weight {weight.shape} and bias {bias.shape} disagree")
        self.group = ParameterGroup(self.GROUP, {
            "weight": parameter(weight, name="projection.weight"),
            "bias": parameter(bias, name="projection.bias"),
        })
        self.group.set_trainable(trainable)

    @classmethod
    def initialise(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "ProjectionLayer":
        # Unit-variance outputs for unit-variance inputs
        weight = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, out_dim))
        return cls(weight, np.zeros(out_dim))

    @property
    def in_dim(self) -> int:
        return self.group.params["weight"].shape[0]

    @property
    def out_dim(self) -> int:
        return self.group.params["weight"].shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise LocovError("shape-mismatch", f"features of dimension {x.shape[-1]}, projection expects {self.in_dim}")
        w, b = self.group.params["weight"], self.group.params["bias"]
        if x.ndim == 1:
            return ops.matmul(ops.reshape(x, (1, -1)), w)[0] + b
        return ops.matmul(x, w) + b


class RegionEncoder:
    """Residual stages x <- x + tanh(x W_s + b_s), each its own parameter group."""

    def __init__(self, stages: List[Dict[str, np.ndarray]]):
        self.groups: List[ParameterGroup] = []
        for i, stage in enumerate(stages, start=1):
            name = f"encoder.stage{i}"
            w = np.asarray(stage["weight"], dtype=np.float64)
            b = np.asarray(stage["bias"], dtype=np.float64)
            if w.ndim != 2 or w.shape[0] != w.shape[1] or b.shape != (w.shape[0],):
                raise LocovError("shape-mismatch", f"{name} needs a square weight and matching bias")
            self.groups.append(ParameterGroup(name, {
                "weight": parameter(w, name=f"{name}.weight"),
                "bias": parameter(b, name=f"{name}.bias"),
            }))

    @classmethod
    def initialise(cls, dim: int, num_stages: int, std: float, rng: np.random.Generator) -> "RegionEncoder":
        return cls([
            {"weight": rng.normal(0.0, std, size=(dim, dim)), "bias": np.zeros(dim)}
            for _ in range(num_stages)
        ])

    @property
    def num_stages(self) -> int:
        return len(self.groups)

    def stage(self, index: int) -> ParameterGroup:
        """1-based stage lookup."""
        return self.groups[index - 1]

    def __call__(self, x: Tensor, upto: Optional[int] = None) -> Tensor:
        for group in self.groups[:upto]:
            w, b = group.params["weight"], group.params["bias"]
            if x.shape[-1] != w.shape[0]:
                raise LocovError("shape-mismatch", f"{group.name} expects dimension {w.shape[0]}, got {x.shape[-1]}")
            flat = ops.reshape(x, (-1, x.shape[-1]))
            update = ops.tanh(ops.matmul(flat, w) + b)
            x = x + ops.reshape(update, x.shape)
        return x


__all__ = ['EmbeddingTable', 'ProjectionLayer', 'RegionEncoder']
