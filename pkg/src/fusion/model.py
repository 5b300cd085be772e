"""
Cross-attention fusion model.

Caption words are the queries. Each layer runs word self-attention,
word-to-region cross-attention and a feed-forward block, each wrapped in
a residual connection and layer norm. Regions are keys and values only
and carry no positional encoding, so the fused score does not depend on
region order. Words carry learned positional encodings.

All image-caption pairs of a batch are fused at once: hidden states have
shape (images, captions, words, D), or (B, 1, words, D) for the matched
pairs only.
"""

from typing import Literal, Tuple

import numpy as np

from ..autodiff import ParameterGroup, Tensor, ops, parameter
from ..autodiff.ops import MASK_LOGIT
from ..utils.errors import LocovError


Pairing = Literal["all", "diagonal"]


class CrossAttentionModel:
    """Transformer-style fusion over (regions, words) with a scalar match head."""

    GROUP = "fusion"

    def __init__(self, dim: int, num_layers: int, num_heads: int, ffn_dim: int, max_words: int,
                 rng: np.random.Generator, init_std: float = 0.02):
        if dim % num_heads:
            raise LocovError("invalid-config", f"dimension {dim} not divisible by {num_heads} heads")
        self.dim = dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.ffn_dim = ffn_dim
        self.max_words = max_words

        def normal(*shape):
            return rng.normal(0.0, init_std, size=shape)

        values = {"positions": normal(max_words, dim)}
        for layer in range(num_layers):
            for block in ("self", "cross"):
                for proj in ("q", "k", "v", "o"):
                    values[f"layer{layer}.{block}.w{proj}"] = normal(dim, dim)
                    values[f"layer{layer}.{block}.b{proj}"] = np.zeros(dim)
            for norm in ("norm1", "norm2", "norm3"):
                values[f"layer{layer}.{norm}.gamma"] = np.ones(dim)
                values[f"layer{layer}.{norm}.beta"] = np.zeros(dim)
            values[f"layer{layer}.ffn.w1"] = normal(dim, ffn_dim)
            values[f"layer{layer}.ffn.b1"] = np.zeros(ffn_dim)
            values[f"layer{layer}.ffn.w2"] = normal(ffn_dim, dim)
            values[f"layer{layer}.ffn.b2"] = np.zeros(dim)
        values["head.weight"] = normal(dim)
        values["head.bias"] = np.zeros(())
        values["mlm.weight"] = normal(dim, dim)
        values["mlm.bias"] = np.zeros(dim)
        values["mlm.gamma"] = np.ones(dim)
        values["mlm.beta"] = np.zeros(dim)
        self.group = ParameterGroup(self.GROUP, {
            name: parameter(v, name=f"{self.GROUP}.{name}") for name, v in values.items()
        })

    def _p(self, name: str) -> Tensor:
        return self.group.params[name]

    def _project(self, x: Tensor, block: str, proj: str) -> Tensor:
        return ops.matmul(x, self._p(f"{block}.w{proj}")) + self._p(f"{block}.b{proj}")

    def _attend(self, x: Tensor, source: Tensor, key_mask: np.ndarray, block: str) -> Tensor:
        """Multi-head attention of queries x (A, P, W, D) over source (A', P', N, D)."""
        a, p, w, d = x.shape
        sa, sp, n, _ = source.shape
        h, dh = self.num_heads, d // self.num_heads

        q = ops.transpose(ops.reshape(self._project(x, block, "q"), (a, p, w, h, dh)), (0, 1, 3, 2, 4))
        k = ops.transpose(ops.reshape(self._project(source, block, "k"), (sa, sp, n, h, dh)), (0, 1, 3, 4, 2))
        v = ops.transpose(ops.reshape(self._project(source, block, "v"), (sa, sp, n, h, dh)), (0, 1, 3, 2, 4))

        scores = ops.matmul(q, k) * (1.0 / np.sqrt(dh))
        scores = ops.masked_fill(scores, ~key_mask, MASK_LOGIT)
        attended = ops.matmul(ops.softmax(scores, axis=-1), v)
        merged = ops.reshape(ops.transpose(attended, (0, 1, 3, 2, 4)), (a, p, w, d))
        return self._project(merged, block, "o")

    def _norm(self, x: Tensor, name: str) -> Tensor:
        return ops.layer_norm(x, self._p(f"{name}.gamma"), self._p(f"{name}.beta"))

    def forward(self, regions: Tensor, region_mask: np.ndarray, words: Tensor, word_mask: np.ndarray,
                pairing: Pairing = "all") -> Tuple[Tensor, np.ndarray]:
        """Fused word states and their validity mask.

        regions: (B_img, R, D); words: (B_cap, W, D). Returns hidden states
        of shape (B_img, B_cap, W, D) for ``all`` or (B, 1, W, D) for
        ``diagonal`` together with a mask broadcastable to (.., .., W).
        """
        bi, r, d = regions.shape
        bc, w, dw = words.shape
        if d != self.dim or dw != self.dim:
            raise LocovError("shape-mismatch", f"fusion dimension {self.dim}, got regions {d} and words {dw}")
        if w > self.max_words:
            raise LocovError("shape-mismatch", f"caption of {w} words exceeds {self.max_words} positions")
        if pairing == "diagonal" and bi != bc:
            raise LocovError("shape-mismatch", f"diagonal pairing of {bi} images with {bc} captions")

        tokens = words + self._p("positions")[:w]
        if pairing == "all":
            x = ops.reshape(tokens, (1, bc, w, d)) + np.zeros((bi, 1, 1, 1))
            query_mask = word_mask.reshape(1, bc, w)
        else:
            x = ops.reshape(tokens, (bc, 1, w, d))
            query_mask = word_mask.reshape(bc, 1, w)
        source = ops.reshape(regions, (bi, 1, r, d))
        self_mask = query_mask[:, :, None, None, :]
        cross_mask = region_mask.reshape(bi, 1, 1, 1, r)

        for layer in range(self.num_layers):
            prefix = f"layer{layer}"
            x = self._norm(x + self._attend(x, x, self_mask, f"{prefix}.self"), f"{prefix}.norm1")
            x = self._norm(x + self._attend(x, source, cross_mask, f"{prefix}.cross"), f"{prefix}.norm2")
            hidden = ops.gelu(ops.matmul(x, self._p(f"{prefix}.ffn.w1")) + self._p(f"{prefix}.ffn.b1"))
            ffn = ops.matmul(hidden, self._p(f"{prefix}.ffn.w2")) + self._p(f"{prefix}.ffn.b2")
            x = self._norm(x + ffn, f"{prefix}.norm3")
        return x, query_mask

    def scores(self, regions: Tensor, region_mask: np.ndarray, words: Tensor, word_mask: np.ndarray) -> Tensor:
        """B_img x B_cap fused match scores."""
        hidden, query_mask = self.forward(regions, region_mask, words, word_mask, "all")
        weights = query_mask[..., None].astype(np.float64)
        counts = np.maximum(query_mask.sum(axis=-1), 1)[..., None].astype(np.float64)
        pooled = ops.sum(hidden * weights, axis=2) / counts
        return ops.sum(pooled * self._p("head.weight"), axis=-1) + self._p("head.bias")

    def token_logits(self, hidden: Tensor, table_weight: Tensor) -> Tensor:
        """Score fused word states (N, D) against every embedding row (V, D)."""
        transformed = ops.gelu(ops.matmul(hidden, self._p("mlm.weight")) + self._p("mlm.bias"))
        transformed = ops.layer_norm(transformed, self._p("mlm.gamma"), self._p("mlm.beta"))
        return ops.matmul(transformed, ops.transpose(table_weight))


def fuse(regions: Tensor, words: Tensor, model: CrossAttentionModel) -> Tensor:
    """Scalar match score of one image (n x D regions) and one caption (m x D words)."""
    if regions.ndim != 2 or words.ndim != 2:
        raise LocovError("shape-mismatch", f"expected n x D and m x D, got {regions.shape} and {words.shape}")
    if regions.shape[0] == 0 or words.shape[0] == 0:
        raise LocovError("empty-side", f"{regions.shape[0]} regions and {words.shape[0]} words")
    n, m = regions.shape[0], words.shape[0]
    scores = model.scores(
        ops.reshape(regions, (1, n, regions.shape[1])), np.ones((1, n), dtype=bool),
        ops.reshape(words, (1, m, words.shape[1])), np.ones((1, m), dtype=bool),
    )
    return ops.reshape(scores, ())


__all__ = ['Pairing', 'CrossAttentionModel', 'fuse']
