"""
Unit tests for the vocabulary, embedding table, region encoder and projection.
"""

import numpy as np
import pytest

from src.autodiff import Tensor
from src.embeddings import (
    MASK_ID, PAD_ID, EmbeddingTable, ProjectionLayer, RegionEncoder, Vocabulary,
    class_embedding, embed_caption, embed_padded, project_regions,
)
from src.regions import GridRegion, Proposal, build_region_set
from src.models.detection import Box
from src.utils.errors import LocovError


pytestmark = pytest.mark.unit


@pytest.fixture
def table(rng):
    return EmbeddingTable.initialise(6, 4, 0.5, rng)


class TestVocabulary:
    """Closed vocabulary with reserved ids."""

    def test_reserved_ids(self):
        """Padding is 0 and mask is 1."""
        vocab = Vocabulary(["cat", "dog"])
        assert vocab.lookup("[PAD]") == PAD_ID
        assert vocab.lookup("[MASK]") == MASK_ID
        assert vocab.lookup("cat") == 2

    def test_unknown_token(self):
        """Words outside the vocabulary are refused."""
        with pytest.raises(LocovError) as exc_info:
            Vocabulary(["cat"]).encode("cat bird")
        assert exc_info.value.code == "unknown-token"

    def test_duplicate_token(self):
        """Each token appears once."""
        with pytest.raises(LocovError):
            Vocabulary(["cat", "cat"])

    def test_save_and_load(self, tmp_path):
        """One token per line, in id order."""
        vocab = Vocabulary(["c00", "##00", "w01"])
        vocab.save(tmp_path / "vocab.txt")
        assert (tmp_path / "vocab.txt").read_text(encoding="utf-8").splitlines() == vocab.tokens
        assert Vocabulary.load(tmp_path / "vocab.txt").tokens == vocab.tokens


class TestEncoding:
    """Captions and class names in the shared space."""

    def test_caption_drops_padding(self, table):
        """One row per real token."""
        words = embed_caption([3, 0, 4, 0], table)
        assert words.shape == (2, 4)
        np.testing.assert_array_equal(words.data[1], table.weight.data[4])

    def test_empty_caption(self, table):
        """Nothing left after padding removal."""
        with pytest.raises(LocovError) as exc_info:
            embed_caption([0, 0], table)
        assert exc_info.value.code == "empty-side"

    def test_class_embedding_is_token_mean(self, table):
        """Multi-token names average their rows."""
        expected = table.weight.data[[2, 5]].mean(axis=0)
        np.testing.assert_allclose(class_embedding([2, 5], table).data, expected)

    def test_class_without_tokens(self, table):
        """A class needs at least one token."""
        with pytest.raises(LocovError) as exc_info:
            class_embedding([], table)
        assert exc_info.value.code == "empty-class-name"

    def test_out_of_range_id(self, table):
        """Ids must index the table."""
        with pytest.raises(LocovError) as exc_info:
            table.rows(np.array([6]))
        assert exc_info.value.code == "unknown-token"

    def test_padded_mask(self, table):
        """The mask marks real tokens."""
        words, mask = embed_padded(np.array([[2, 3, 0], [4, 0, 0]]), table)
        assert words.shape == (2, 3, 4)
        np.testing.assert_array_equal(mask, [[True, True, False], [True, False, False]])


class TestRegionEncoder:
    """Residual stages and the projection layer."""

    def test_zero_weights_are_identity(self, rng):
        """tanh(0) adds nothing."""
        encoder = RegionEncoder([{"weight": np.zeros((3, 3)), "bias": np.zeros(3)} for _ in range(4)])
        x = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(encoder(Tensor(x)).data, x)

    def test_one_group_per_stage(self, rng):
        """Stages are the freezing unit."""
        encoder = RegionEncoder.initialise(3, 4, 0.1, rng)
        assert [g.name for g in encoder.groups] == [f"encoder.stage{i}" for i in range(1, 5)]

    def test_leading_axes_preserved(self, rng):
        """Batched input keeps its shape."""
        encoder = RegionEncoder.initialise(3, 2, 0.1, rng)
        assert encoder(Tensor(rng.normal(size=(2, 4, 3)))).shape == (2, 4, 3)

    def test_projection_is_affine(self, rng):
        """Rows map through x W + b."""
        proj = ProjectionLayer(rng.normal(size=(3, 2)), rng.normal(size=2))
        x = rng.normal(size=(4, 3))
        expected = x @ proj.group.params["weight"].data + proj.group.params["bias"].data
        np.testing.assert_allclose(proj(Tensor(x)).data, expected)

    def test_project_regions_keeps_geometry(self, rng):
        """Boxes and grid indices are untouched."""
        proposals = [Proposal(Box(x1=0, y1=0, x2=5, y2=5), 0.9, rng.normal(size=3))]
        grid = [GridRegion((0, 0), rng.normal(size=3))]
        raw = build_region_set(7, proposals, grid)
        proj = ProjectionLayer.initialise(3, 2, rng)
        projected = project_regions(raw, proj)
        assert projected.box_features.shape == (1, 2)
        assert projected.grid_features.shape == (1, 2)
        np.testing.assert_array_equal(projected.boxes, raw.boxes)

    def test_projection_dimension_mismatch(self, rng):
        """Features must match the projection input."""
        proj = ProjectionLayer.initialise(3, 2, rng)
        with pytest.raises(LocovError) as exc_info:
            proj(Tensor(rng.normal(size=(2, 4))))
        assert exc_info.value.code == "shape-mismatch"
