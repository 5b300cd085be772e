"""
Region-word matching and the contrastive grounding objective.
"""

from .grounding import (
    Axis, alignment_weights, image_caption_similarity, batch_similarity,
    grounding_loss, total_grounding_loss,
)

__all__ = [
    'Axis', 'alignment_weights', 'image_caption_similarity', 'batch_similarity',
    'grounding_loss', 'total_grounding_loss',
]
