"""
Vocabulary, word embeddings, region encoder and projection layer.
"""

from .vocabulary import Vocabulary, PAD_TOKEN, MASK_TOKEN, PAD_ID, MASK_ID
from .layers import EmbeddingTable, ProjectionLayer, RegionEncoder
from .encoding import embed_caption, class_embedding, project_regions, embed_padded

__all__ = [
    'Vocabulary', 'PAD_TOKEN', 'MASK_TOKEN', 'PAD_ID', 'MASK_ID',
    'EmbeddingTable', 'ProjectionLayer', 'RegionEncoder',
    'embed_caption', 'class_embedding', 'project_regions', 'embed_padded',
]
