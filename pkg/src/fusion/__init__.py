"""
Cross-attention fusion and the matching-stage objectives.
"""

from .model import CrossAttentionModel, Pairing, fuse
from .objectives import (
    DEFAULT_MASK_RATIO, MaskedBatch, icm_loss, match_distribution, mask_tokens,
    token_nll, mlm_loss, consistency_loss, lsm_total_loss,
)

__all__ = [
    'CrossAttentionModel', 'Pairing', 'fuse',
    'DEFAULT_MASK_RATIO', 'MaskedBatch', 'icm_loss', 'match_distribution', 'mask_tokens',
    'token_nll', 'mlm_loss', 'consistency_loss', 'lsm_total_loss',
]
