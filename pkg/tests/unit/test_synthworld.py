"""
Unit tests for the synthetic world generator and its statistics.
"""

import numpy as np
import pytest

from src.synthworld.statistics import world_statistics
from src.synthworld.world import class_tokens, generate_world
from src.utils.errors import ConfigError
from tests.conftest import tiny_world


pytestmark = pytest.mark.unit


class TestGenerateWorld:
    """Seeded, split-aware generation."""

    def test_deterministic(self, world_config, dataset):
        """Same seed, same arrays."""
        again = generate_world(world_config)
        for split, images in dataset.splits.items():
            for a, b in zip(images, again.splits[split]):
                np.testing.assert_array_equal(a.proposal_features, b.proposal_features)
                np.testing.assert_array_equal(a.caption, b.caption)
                np.testing.assert_array_equal(a.grid_features, b.grid_features)

    def test_seed_changes_world(self, dataset):
        """A different seed gives different features."""
        other = generate_world(tiny_world(seed=4))
        assert not np.array_equal(other.raw_prototypes, dataset.raw_prototypes)

    def test_split_sizes(self, world_config, dataset):
        """Image counts follow the config; ids are unique."""
        assert [len(dataset.splits[s]) for s in ("train", "val", "test")] == [12, 4, 6]
        ids = [image.image_id for images in dataset.splits.values() for image in images]
        assert len(set(ids)) == len(ids)

    def test_train_labels_are_known(self, dataset):
        """Novel objects appear in train only as unlabelled objects."""
        novel = set(dataset.novel_ids)
        for image in dataset.split("train"):
            assert not novel & set(image.gt_classes.tolist())
            assert set(image.unlabelled_classes.tolist()) <= novel

    def test_test_split_fully_labelled(self, dataset):
        """Evaluation splits label every object."""
        for image in dataset.split("test"):
            assert len(image.unlabelled_classes) == 0

    def test_captions_name_every_object(self, world_config, dataset):
        """Every object's class tokens are in the caption."""
        tokens = {c.class_id: set(c.tokens) for c in dataset.classes}
        for image in dataset.split("train"):
            caption = set(image.caption.tolist())
            for c in image.all_classes.tolist():
                assert tokens[c] <= caption
            assert world_config.caption_min <= len(image.caption) <= world_config.caption_max

    def test_shapes(self, world_config, dataset):
        """Grid maps and proposals have the configured sizes."""
        image = dataset.split("val")[0]
        g, f = world_config.grid_size, world_config.feature_dim
        assert image.grid_features.shape == (g, g, f)
        assert image.proposal_features.shape == (len(image.proposal_scores), f)
        assert np.all((image.proposal_scores >= 0) & (image.proposal_scores <= 1))

    def test_multi_token_names(self):
        """Every n-th class name splits in two tokens."""
        assert class_tokens(1, 2) == ["c01", "##01"]
        assert class_tokens(2, 2) == ["c02"]
        assert class_tokens(3, 0) == ["c03"]

    def test_invalid_config_names_field(self):
        """Validation errors carry the offending field."""
        with pytest.raises(ConfigError) as exc_info:
            generate_world({"num_known": 0})
        assert exc_info.value.field == "num_known"


class TestStatistics:
    """Per-split summary."""

    def test_coverage_and_counts(self, dataset):
        """Captions cover every object; counts add up."""
        stats = world_statistics(dataset)
        train = stats.splits["train"]
        assert train.caption_coverage == pytest.approx(1.0)
        assert train.images == 12
        assert sum(train.class_frequencies.values()) == train.labelled_objects + train.unlabelled_objects
        assert 0.0 <= train.proposal_recall <= 1.0
