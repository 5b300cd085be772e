"""
Unit tests for box-region selection, grid regions and padded batches.
"""

import numpy as np
import pytest

from src.models.detection import Box
from src.regions import (
    Proposal, build_region_set, make_grid_regions, pad_regions, select_box_indices, select_box_regions,
)
from src.utils.errors import LocovError


pytestmark = pytest.mark.unit


def _proposal(score, x=0.0):
    return Proposal(Box(x1=x, y1=0.0, x2=x + 10.0, y2=10.0), score, np.full(3, score))


class TestBoxSelection:
    """Threshold, order and cap."""

    def test_threshold_is_strict(self):
        """Scores equal to the threshold are dropped."""
        kept = select_box_regions([_proposal(0.7), _proposal(0.71)], threshold=0.7)
        assert [p.score for p in kept] == [0.71]

    def test_descending_with_stable_ties(self):
        """Highest first; equal scores keep input order."""
        proposals = [_proposal(0.8, 0), _proposal(0.9, 1), _proposal(0.8, 2)]
        kept = select_box_regions(proposals, threshold=0.5)
        assert [p.box.x1 for p in kept] == [1, 0, 2]

    def test_cap(self):
        """At most ``cap`` regions."""
        proposals = [_proposal(0.9 - 0.01 * i, i) for i in range(10)]
        assert len(select_box_regions(proposals, threshold=0.0, cap=3)) == 3

    def test_indices_agree_with_objects(self, rng):
        """Array and object forms select the same proposals."""
        scores = np.round(rng.uniform(size=30), 1)
        proposals = [_proposal(float(s), i) for i, s in enumerate(scores)]
        by_object = [int(p.box.x1) for p in select_box_regions(proposals, 0.4, 7)]
        assert select_box_indices(scores, 0.4, 7).tolist() == by_object

    def test_nothing_above_threshold(self):
        """An empty selection is allowed."""
        assert select_box_regions([_proposal(0.1)], threshold=0.7) == []

    def test_bad_score(self):
        """Objectness lies in [0, 1]."""
        with pytest.raises(LocovError):
            _proposal(1.5)


class TestGridRegions:
    """Row-major grid cells."""

    def test_row_major(self, rng):
        """G x G map becomes G*G regions."""
        fmap = rng.normal(size=(3, 3, 2))
        cells = make_grid_regions(fmap)
        assert [c.index for c in cells][:4] == [(0, 0), (0, 1), (0, 2), (1, 0)]
        np.testing.assert_array_equal(cells[5].feature, fmap[1, 2])

    def test_non_square_map(self):
        """The map must be square."""
        with pytest.raises(LocovError):
            make_grid_regions(np.zeros((2, 3, 4)))


class TestRegionSet:
    """Per-image region sets and batches."""

    def test_cap_enforced(self):
        """More box regions than the cap is an error."""
        with pytest.raises(LocovError):
            build_region_set(0, [_proposal(0.9, i) for i in range(3)], [], cap=2)

    def test_features_of_absent_kind(self):
        """Asking for a kind the set was not built with fails."""
        region_set = build_region_set(0, [_proposal(0.9)], [], kinds=("box",))
        with pytest.raises(LocovError):
            region_set.features("grid")

    def test_padding(self):
        """Short images are zero padded and masked."""
        batch = pad_regions([np.ones((2, 3)), np.ones((0, 3))], 3)
        assert batch.features.shape == (2, 2, 3)
        np.testing.assert_array_equal(batch.counts, [2, 0])
        assert batch.features.data[1].sum() == 0.0
