"""
Unit tests for the assembled detector network and its region inputs.
"""

import numpy as np
import pytest

from src.models.experiment import ModelConfig, RegionConfig
from src.network import DetectorNetwork, detection_regions, image_regions, raw_region_batches
from src.storage import load_checkpoint, save_checkpoint
from src.storage.tensor_io import to_float32
from src.utils.errors import LocovError
from src.workflows.common import snapshot
from tests.conftest import tiny_config


pytestmark = pytest.mark.unit


def _with_model(config, **changes):
    return config.model_copy(update={"model": config.model.model_copy(update=changes)})


class TestBuild:
    """Parameter initialisation and groups."""

    def test_groups(self, config, dataset):
        """Embeddings, four encoder stages, projection and fusion."""
        network = DetectorNetwork.for_dataset(config, dataset)
        assert [g.name for g in network.groups()] == [
            "embeddings", "encoder.stage1", "encoder.stage2", "encoder.stage3", "encoder.stage4",
            "projection", "fusion",
        ]
        assert "fusion" not in [g.name for g in network.stt_groups()]

    def test_deterministic(self, config, dataset):
        """Same config, same parameters."""
        a = DetectorNetwork.for_dataset(config, dataset).state()
        b = DetectorNetwork.for_dataset(config, dataset).state()
        assert a.keys() == b.keys()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_pretrained_table_ignores_run_seed(self, dataset):
        """Frozen and fine-tuned tables depend on the world only; scratch does not."""
        def table(seed, mode):
            config = _with_model(tiny_config(seed=seed), embedding_mode=mode)
            return DetectorNetwork.for_dataset(config, dataset).table.weight.data

        np.testing.assert_array_equal(table(0, "frozen"), table(5, "frozen"))
        np.testing.assert_array_equal(table(0, "frozen"), table(0, "finetune"))
        assert not np.array_equal(table(0, "frozen"), table(0, "scratch"))

    def test_table_trainable_by_mode(self, config, dataset):
        """Only the frozen mode fixes the table."""
        assert not DetectorNetwork.for_dataset(config, dataset).table.trainable
        finetune = _with_model(config, embedding_mode="finetune")
        assert DetectorNetwork.for_dataset(finetune, dataset).table.trainable

    def test_state_survives_a_checkpoint(self, config, dataset, tmp_path):
        """Saved parameters, scalars included, load back into a fresh network."""
        network = DetectorNetwork.for_dataset(config, dataset)
        path = save_checkpoint(snapshot(network, "LSM", 0), tmp_path / "lsm.ckpt")
        restored = DetectorNetwork.for_dataset(config, dataset)
        restored.load_state(load_checkpoint(path, "LSM").params)
        for name, values in network.state().items():
            assert restored.state()[name].shape == np.shape(values)
            np.testing.assert_array_equal(restored.state()[name], to_float32(values))

    def test_load_state_shape_mismatch(self, config, dataset):
        """Parameters of another architecture are refused."""
        network = DetectorNetwork.for_dataset(config, dataset)
        state = network.state()
        state["projection.bias"] = np.zeros(3)
        with pytest.raises(LocovError) as exc_info:
            network.load_state(state)
        assert exc_info.value.code == "shape-mismatch"

    def test_load_state_missing_tensor(self, config, dataset):
        """Every tensor must be present."""
        network = DetectorNetwork.for_dataset(config, dataset)
        state = network.state()
        del state[sorted(k for k in state if k.startswith("fusion."))[0]]
        with pytest.raises(LocovError):
            network.load_state(state)

    def test_encode_shape(self, config, dataset):
        """Raw features land in the text-embedding space."""
        network = DetectorNetwork.for_dataset(config, dataset)
        raw = detection_regions(dataset.split("test")[0], config.regions)
        encoded = network.encode_regions(raw)
        assert encoded.box_features.shape[1] == config.model.embed_dim


class TestRegionInputs:
    """Per-image region sets for both stages."""

    @pytest.mark.parametrize("mode,kinds", [("both", ("box", "grid")), ("box", ("box",)), ("grid", ("grid",))])
    def test_kinds(self, dataset, mode, kinds):
        """Region mode selects the kinds."""
        image = dataset.split("train")[0]
        regions = image_regions(image, RegionConfig(mode=mode, box_cap=5), dataset.known_ids)
        assert regions.kinds == kinds
        if "grid" in kinds:
            assert regions.grid_features.shape[0] == dataset.config.grid_size ** 2

    def test_proposals_thresholded_and_capped(self, dataset):
        """Only confident proposals, at most the cap."""
        image = dataset.split("train")[0]
        regions = image_regions(image, RegionConfig(box_cap=1, objectness_threshold=0.5), dataset.known_ids)
        assert regions.box_features.shape[0] <= 1
        assert np.all(regions.box_scores > 0.5)

    def test_annotated_known_boxes(self, dataset):
        """The known-annotation oracle uses labelled known boxes only."""
        for image in dataset.split("train"):
            regions = image_regions(image, RegionConfig(box_source="ann_known", box_cap=10), dataset.known_ids)
            np.testing.assert_array_equal(regions.boxes, image.gt_boxes)

    def test_annotated_all_boxes(self, dataset):
        """The full oracle adds unlabelled novel boxes."""
        for image in dataset.split("train"):
            regions = image_regions(image, RegionConfig(box_source="ann_all", box_cap=10), dataset.known_ids)
            assert len(regions.boxes) == len(image.gt_boxes) + len(image.unlabelled_boxes)

    def test_detection_regions(self, dataset):
        """Detection sees box regions only."""
        image = dataset.split("test")[0]
        regions = detection_regions(image, RegionConfig(box_cap=3, objectness_threshold=0.7))
        assert regions.kinds == ("box",)
        assert len(regions.boxes) <= 3

    def test_batches_per_kind(self, dataset):
        """One padded batch per enabled kind."""
        images = dataset.split("train")[:3]
        sets = [image_regions(i, RegionConfig(box_cap=5), dataset.known_ids) for i in images]
        batches = raw_region_batches(sets)
        assert set(batches) == {"box", "grid"}
        assert batches["grid"].features.shape == (3, dataset.config.grid_size ** 2, dataset.config.feature_dim)

    def test_model_config_divisibility(self):
        """Heads must divide the embedding dimension."""
        with pytest.raises(ValueError):
            ModelConfig(embed_dim=10, fusion_heads=4)
