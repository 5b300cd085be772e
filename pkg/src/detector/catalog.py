"""
Known/novel class catalog and its class embeddings.
"""

from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np

from ..autodiff import Tensor, ops
from ..embeddings.encoding import class_embedding
from ..embeddings.layers import EmbeddingTable
from ..models.detection import ClassInfo
from ..utils.errors import LocovError


ClassSet = Literal["known", "novel", "all"]

SETUP_CLASS_SET = {"novel": "novel", "known": "known", "generalized": "all"}


@dataclass
class ClassCatalog:
    """Classes split into known and novel; embeddings come from a bound table.

    The background class is implicit: its vector is all zeros and it is
    never trained.
    """
    classes: List[ClassInfo]
    table: Optional[EmbeddingTable] = None

    def __post_init__(self):
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise LocovError("invalid-config", "duplicate class ids in catalog")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise LocovError("invalid-config", "duplicate class names in catalog")

    def bind(self, table: EmbeddingTable) -> "ClassCatalog":
        return ClassCatalog(list(self.classes), table)

    @property
    def known(self) -> List[ClassInfo]:
        return [c for c in self.classes if c.split == "known"]

    @property
    def novel(self) -> List[ClassInfo]:
        return [c for c in self.classes if c.split == "novel"]

    @property
    def novel_ids(self) -> set:
        return {c.class_id for c in self.novel}

    def members(self, class_set: str) -> List[ClassInfo]:
        class_set = SETUP_CLASS_SET.get(class_set, class_set)
        if class_set == "all":
            members = list(self.classes)
        elif class_set in ("known", "novel"):
            members = [c for c in self.classes if c.split == class_set]
        else:
            raise LocovError("setup-mismatch", f"unknown class set {class_set!r}")
        if not members:
            raise LocovError("invalid-config", f"class set {class_set!r} is empty")
        return members

    def ids(self, class_set: str) -> np.ndarray:
        return np.array([c.class_id for c in self.members(class_set)], dtype=np.int64)

    def embeddings(self, class_set: str) -> Tensor:
        """K x D matrix of class vectors, rows in catalog order."""
        if self.table is None:
            raise LocovError("invalid-config", "catalog has no embedding table bound")
        return ops.stack([class_embedding(c.tokens, self.table) for c in self.members(class_set)], axis=0)

    def background(self) -> np.ndarray:
        if self.table is None:
            raise LocovError("invalid-config", "catalog has no embedding table bound")
        return np.zeros(self.table.dim)

    def name_of(self, class_id: int) -> str:
        for c in self.classes:
            if c.class_id == class_id:
                return c.name
        raise LocovError("invalid-config", f"class id {class_id} not in catalog")


__all__ = ['ClassSet', 'SETUP_CLASS_SET', 'ClassCatalog']
