"""
Tensor and computation record for the reverse-mode engine.

Tensors are built define-by-run: every primitive applied to a tracked
tensor produces a new tensor that remembers its inputs and a closure
returning the vector-Jacobian products for them. ``backward`` walks the
record in reverse topological order, visiting each node once.
"""

import itertools
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import LocovError


_node_ids = itertools.count()

# Returns one gradient (or None) per input, given the output gradient
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __array_priority__ = 1000

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _parents: Tuple["Tensor", ...] = (),
        _backward: Optional[BackwardFn] = None,
        _op: str = "leaf",
    ):
        self.data = np.array(data, dtype=np.float64, copy=True) if _op == "leaf" else np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.node_id = next(_node_ids)
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    # ------------------------------------------------------------------ #
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._op == "leaf"

    def item(self) -> float:
        if self.data.size != 1:
            raise LocovError("non-scalar-root", f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same values, cut from the record."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{label}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.shape[0]

    # Operator sugar; implementations live in ops.py
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from .ops import div
        return div(self, other)

    def __rtruediv__(self, other):
        from .ops import div
        return div(other, self)

    def __neg__(self):
        from .ops import neg
        return neg(self)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __getitem__(self, index):
        from .ops import getitem
        return getitem(self, index)

    @property
    def T(self) -> "Tensor":
        from .ops import transpose
        return transpose(self)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from .ops import sum as _sum
        return _sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from .ops import mean
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(value) -> Tensor:
    """Wrap constants; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: BackwardFn,
    op: str,
) -> Tensor:
    """Create the output of a primitive, recording it only when some input is tracked."""
    tracked = any(p.requires_grad for p in parents)
    if not tracked:
        return Tensor(data, requires_grad=False, _op=op)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward_fn, _op=op)


@dataclass
class RecordEntry:
    """One primitive application."""
    op: str
    inputs: Tuple[int, ...]
    output: int


@dataclass
class ComputationRecord:
    """Topologically ordered primitive applications reachable from a root."""
    nodes: List[Tensor] = field(default_factory=list)

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationRecord":
        order: List[Tensor] = []
        seen = set()
        # Iterative post-order DFS; deep fusion graphs exceed the recursion limit
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.node_id in seen:
                continue
            seen.add(node.node_id)
            stack.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and parent.node_id not in seen:
                    stack.append((parent, False))
        return cls(nodes=order)

    @property
    def entries(self) -> List[RecordEntry]:
        return [
            RecordEntry(op=n._op, inputs=tuple(p.node_id for p in n._parents), output=n.node_id)
            for n in self.nodes
            if not n.is_leaf
        ]

    def leaves(self) -> List[Tensor]:
        return [n for n in self.nodes if n.is_leaf]

    def __len__(self) -> int:
        return len(self.nodes)


def backward(root: Tensor, record: Optional[ComputationRecord] = None) -> ComputationRecord:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every tracked leaf."""
    if root.data.size != 1 or root.ndim > 1:
        raise LocovError("non-scalar-root", f"root has shape {root.shape}")
    if not np.isfinite(root.data).all():
        raise LocovError("non-finite-loss", "root value is not finite")
    if record is None:
        record = ComputationRecord.trace(root)
    if not root.requires_grad:
        return record

    grads = {root.node_id: np.ones_like(root.data)}
    for node in reversed(record.nodes):
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = np.array(g, dtype=np.float64) if node.grad is None else node.grad + g
            continue
        contributions = node._backward(g)
        for parent, pg in zip(node._parents, contributions):
            if pg is None or not parent.requires_grad:
                continue
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                grads[parent.node_id] = pg
    return record


def parameter(data, name: Optional[str] = None) -> Tensor:
    """Tracked leaf tensor."""
    return Tensor(data, requires_grad=True, name=name)


__all__ = [
    'Tensor',
    'ComputationRecord',
    'RecordEntry',
    'as_tensor',
    'make_node',
    'backward',
    'parameter',
]
