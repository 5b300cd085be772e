"""
Background-aware classification over class embeddings.

p(r, c_k) = exp(r . c_k) / (1 + sum_k' exp(r . c_k')); the constant 1 is
the background, whose vector is all zeros. Probabilities are returned
with the background in the last column.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..autodiff import SGD, Tensor, backward, ops
from ..embeddings.layers import ProjectionLayer, RegionEncoder
from ..models.detection import BACKGROUND_ID
from ..utils.errors import LocovError, NonFiniteLossError
from .catalog import ClassCatalog


def classify_regions(features: Tensor, class_embeddings: Tensor) -> Tensor:
    """N x (K + 1) probabilities for N x D features against K x D classes."""
    if features.ndim != 2 or class_embeddings.ndim != 2:
        raise LocovError("shape-mismatch", f"expected N x D and K x D, got {features.shape}, {class_embeddings.shape}")
    if features.shape[1] != class_embeddings.shape[1]:
        raise LocovError("shape-mismatch", f"region dimension {features.shape[1]} vs class dimension {class_embeddings.shape[1]}")
    if class_embeddings.shape[0] == 0:
        raise LocovError("invalid-config", "empty class set")
    logits = ops.matmul(features, ops.transpose(class_embeddings))
    background = np.zeros((features.shape[0], 1))
    return ops.softmax(ops.concat([logits, Tensor(background)], axis=1), axis=1)


def classify_region(r: Tensor, catalog: ClassCatalog, class_set: str) -> Tuple[Tensor, np.ndarray]:
    """Probability vector over ``class_set`` plus background (last) for one region."""
    r = r if isinstance(r, Tensor) else Tensor(r)
    if r.ndim != 1:
        raise LocovError("shape-mismatch", f"region vector must be one-dimensional, got {r.shape}")
    probs = classify_regions(ops.reshape(r, (1, r.shape[0])), catalog.embeddings(class_set))
    return ops.reshape(probs, (probs.shape[1],)), catalog.ids(class_set)


def stt_targets(labels: np.ndarray, catalog: ClassCatalog) -> np.ndarray:
    """Column index per label over known classes, background last."""
    labels = np.asarray(labels, dtype=np.int64)
    novel = sorted(set(labels.tolist()) & catalog.novel_ids)
    if novel:
        raise LocovError("novel-label-in-stt", f"labels include novel classes {novel}")
    known_ids = catalog.ids("known")
    column = {int(c): i for i, c in enumerate(known_ids)}
    column[BACKGROUND_ID] = len(known_ids)
    unknown = sorted(set(labels.tolist()) - set(column))
    if unknown:
        raise LocovError("invalid-config", f"labels {unknown} are neither known classes nor background")
    return np.array([column[int(l)] for l in labels], dtype=np.int64)


def stt_loss(features: Tensor, labels: np.ndarray, catalog: ClassCatalog) -> Tensor:
    """Mean cross-entropy of the background-aware probabilities over known classes."""
    targets = stt_targets(labels, catalog)
    if len(targets) == 0:
        raise LocovError("empty-side", "task-tuning batch has no regions")
    logits = ops.matmul(features, ops.transpose(catalog.embeddings("known")))
    logits = ops.concat([logits, Tensor(np.zeros((features.shape[0], 1)))], axis=1)
    log_probs = ops.log_softmax(logits, axis=1)
    return -ops.mean(log_probs[np.arange(len(targets)), targets])


@dataclass
class STTBatch:
    """Raw region features with known-class or background labels."""
    features: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


def stt_train_step(batch: STTBatch, encoder: RegionEncoder, projection: ProjectionLayer,
                   catalog: ClassCatalog, optimizer: SGD, lr: float) -> float:
    """One task-tuning update; frozen groups are skipped by the optimizer."""
    stt_targets(batch.labels, catalog)
    optimizer.zero_grad()
    features = projection(encoder(Tensor(batch.features)))
    loss = stt_loss(features, batch.labels, catalog)
    if not np.isfinite(loss.data).all():
        raise NonFiniteLossError("task-tuning loss is not finite")
    backward(loss)
    optimizer.step(lr)
    return loss.item()


__all__ = [
    'classify_regions', 'classify_region', 'stt_targets', 'stt_loss',
    'STTBatch', 'stt_train_step',
]
