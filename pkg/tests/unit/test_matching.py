"""
Unit tests for region-word similarity and the grounding loss.
"""

import numpy as np
import pytest

from src.autodiff import Tensor, compare_gradients, parameter
from src.matching import (
    alignment_weights, batch_similarity, grounding_loss, image_caption_similarity, total_grounding_loss,
)
from src.regions import RegionBatch, pad_regions
from src.utils.errors import LocovError


pytestmark = pytest.mark.unit


def _padded_words(captions, dim):
    width = max(len(c) for c in captions)
    words = np.zeros((len(captions), width, dim))
    mask = np.zeros((len(captions), width), dtype=bool)
    for i, c in enumerate(captions):
        words[i, :len(c)] = c
        mask[i, :len(c)] = True
    return words, mask


class TestSimilarity:
    """Alignment-weighted image-caption similarity."""

    def test_alignment_rows_sum_to_one(self, rng):
        """Each region distributes its attention over the words."""
        d = alignment_weights(Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(5, 4))))
        np.testing.assert_allclose(d.data.sum(axis=1), np.ones(3))

    def test_single_word_caption(self, rng):
        """With one word the similarity is the mean dot product."""
        regions = rng.normal(size=(4, 3))
        word = rng.normal(size=(1, 3))
        expected = (regions @ word.T).mean()
        assert image_caption_similarity(Tensor(regions), Tensor(word)).item() == pytest.approx(expected)

    def test_word_order_does_not_matter(self, rng):
        """Shuffling the caption words leaves the similarity unchanged."""
        regions, words = rng.normal(size=(3, 4)), rng.normal(size=(5, 4))
        shuffled = words[rng.permutation(5)]
        assert image_caption_similarity(Tensor(regions), Tensor(shuffled)).item() == pytest.approx(
            image_caption_similarity(Tensor(regions), Tensor(words)).item(), abs=1e-12)

    def test_empty_side(self, rng):
        """Both sides need at least one vector."""
        with pytest.raises(LocovError) as exc_info:
            image_caption_similarity(Tensor(np.zeros((0, 3))), Tensor(rng.normal(size=(2, 3))))
        assert exc_info.value.code == "empty-side"

    def test_dimension_mismatch(self, rng):
        """Regions and words share one dimension."""
        with pytest.raises(LocovError) as exc_info:
            image_caption_similarity(Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(2, 4))))
        assert exc_info.value.code == "shape-mismatch"

    def test_batch_matches_pairwise(self, rng):
        """Padding does not change any entry of the batch matrix."""
        dim = 4
        per_image = [rng.normal(size=(n, dim)) for n in (3, 1, 2)]
        captions = [rng.normal(size=(m, dim)) for m in (2, 4, 1)]
        words, mask = _padded_words(captions, dim)
        matrix = batch_similarity(pad_regions(per_image, dim), Tensor(words), mask).data
        for a, regions in enumerate(per_image):
            for b, caption in enumerate(captions):
                expected = image_caption_similarity(Tensor(regions), Tensor(caption)).item()
                assert matrix[a, b] == pytest.approx(expected, abs=1e-12)

    def test_image_without_regions_scores_zero(self, rng):
        """An empty row is all zeros."""
        words, mask = _padded_words([rng.normal(size=(2, 3)), rng.normal(size=(3, 3))], 3)
        batch = pad_regions([rng.normal(size=(2, 3)), np.zeros((0, 3))], 3)
        matrix = batch_similarity(batch, Tensor(words), mask).data
        np.testing.assert_array_equal(matrix[1], [0.0, 0.0])


class TestGroundingLoss:
    """Contrastive loss over the batch similarity matrix."""

    def test_strong_diagonal_gives_small_loss(self):
        """Matched pairs far above the rest cost almost nothing."""
        similarity = Tensor(np.eye(3) * 50.0)
        assert grounding_loss(similarity, "image").item() < 1e-10

    def test_loss_falls_with_diagonal_margin(self, rng):
        """Raising the margin of matched pairs over the rest lowers the loss towards zero."""
        off = rng.uniform(0.0, 1.0, size=(4, 4))
        losses = []
        for margin in (1.0, 10.0, 100.0):
            s = off.copy()
            np.fill_diagonal(s, 1.0 + margin)
            matrix = Tensor(s)
            losses.append(grounding_loss(matrix, "image").item() + grounding_loss(matrix, "caption").item())
        assert losses[0] > losses[1] > losses[2] >= 0.0
        assert losses[2] < 1e-10

    def test_duplicate_caption_is_a_harder_negative(self):
        """Replacing an unrelated caption with a copy of another image's caption raises the loss."""
        dim, scale = 3, 5.0
        regions = [np.eye(dim)[0:1] * scale, np.eye(dim)[1:2] * scale, np.zeros((1, dim))]
        batch = pad_regions(regions, dim)
        for axis in ("image", "caption"):
            words, mask = _padded_words([np.eye(dim)[0:1], np.eye(dim)[1:2], np.eye(dim)[2:3]], dim)
            base = grounding_loss(batch_similarity(batch, Tensor(words), mask), axis).item()
            words, mask = _padded_words([np.eye(dim)[0:1], np.eye(dim)[1:2], np.eye(dim)[0:1]], dim)
            harder = grounding_loss(batch_similarity(batch, Tensor(words), mask), axis).item()
            assert harder > base

    def test_uniform_matrix(self):
        """Equal scores cost log B."""
        assert grounding_loss(Tensor(np.zeros((4, 4))), "caption").item() == pytest.approx(np.log(4))

    def test_axes_are_transposes(self, rng):
        """Caption-axis loss of S equals image-axis loss of S transposed."""
        s = rng.normal(size=(3, 3))
        assert grounding_loss(Tensor(s), "caption").item() == pytest.approx(grounding_loss(Tensor(s.T), "image").item())

    def test_total_sums_kinds_and_axes(self, rng):
        """Four terms when both kinds are present."""
        box, grid = Tensor(rng.normal(size=(3, 3))), Tensor(rng.normal(size=(3, 3)))
        expected = sum(grounding_loss(s, a).item() for s in (box, grid) for a in ("image", "caption"))
        assert total_grounding_loss(box, grid).item() == pytest.approx(expected)

    def test_total_single_kind(self, rng):
        """A missing kind contributes nothing."""
        grid = Tensor(rng.normal(size=(2, 2)))
        expected = grounding_loss(grid, "image").item() + grounding_loss(grid, "caption").item()
        assert total_grounding_loss(None, grid).item() == pytest.approx(expected)

    def test_non_square(self, rng):
        """The similarity matrix must be square."""
        with pytest.raises(LocovError):
            grounding_loss(Tensor(rng.normal(size=(2, 3))))

    def test_gradient_through_batch_similarity(self, rng):
        """Loss gradients reach both regions and words."""
        dim = 3
        regions = parameter(rng.normal(size=(2, 2, dim)))
        words = parameter(rng.normal(size=(2, 3, dim)))
        mask = np.array([[True, True, False], [True, True, True]])
        region_mask = np.array([[True, False], [True, True]])

        def loss():
            return total_grounding_loss(batch_similarity(RegionBatch(regions, region_mask), words, mask), None)

        results = compare_gradients(loss, {"regions": regions, "words": words})
        assert all(r.passed for r in results)
