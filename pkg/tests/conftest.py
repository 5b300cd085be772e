"""
Pytest configuration and fixtures for testing.
"""

import os

import numpy as np
import pytest

# Set testing environment
os.environ["LOCOV_APP_ENV"] = "testing"
os.environ.setdefault("LOCOV_LOG_LEVEL", "WARNING")

from src.config.settings import reset_settings
from src.models.experiment import (
    ExperimentConfig, LSMConfig, ModelConfig, RegionConfig, STTConfig, ScheduleConfig, WorldConfig,
)
from src.storage.dataset_store import save_dataset
from src.synthworld.world import generate_world


def tiny_world(**overrides) -> WorldConfig:
    """A world small enough to train in a few seconds."""
    values = dict(
        num_known=4, num_novel=2, latent_dim=8, feature_dim=6,
        train_images=12, val_images=4, test_images=6,
        objects_min=1, objects_max=2, caption_min=4, caption_max=6,
        distractor_tokens=5, multi_token_every=2, grid_size=2, noise_proposals=2, seed=3,
    )
    values.update(overrides)
    return WorldConfig(**values)


def tiny_config(**overrides) -> ExperimentConfig:
    """Reduced experiment over :func:`tiny_world`."""
    values = dict(
        world=tiny_world(),
        model=ModelConfig(embed_dim=8, fusion_layers=1, fusion_heads=2, ffn_dim=8,
                          encoder_stages=4, embedding_std=0.3, init_std=0.1),
        regions=RegionConfig(box_cap=5),
        lsm=LSMConfig(steps=3, batch_size=4, checkpoint_every=0,
                      schedule=ScheduleConfig(base_rate=0.01, decay_steps=[2])),
        stt=STTConfig(steps=4, images_per_batch=3, eval_every=2, patience=2, checkpoint_every=0,
                      schedule=ScheduleConfig(base_rate=0.005, decay_steps=[3])),
        seed=0,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture(scope="session")
def world_config():
    """Tiny world configuration."""
    return tiny_world()


@pytest.fixture(scope="session")
def dataset(world_config):
    """Generated tiny dataset, shared across the session (treat as read-only)."""
    return generate_world(world_config)


@pytest.fixture(scope="session")
def dataset_dir(dataset, tmp_path_factory):
    """The tiny dataset written to disk."""
    return save_dataset(dataset, tmp_path_factory.mktemp("dataset"))


@pytest.fixture
def config():
    """Reduced experiment configuration."""
    return tiny_config()


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def config_file(tmp_path, config):
    """The reduced configuration as a JSON file."""
    path = tmp_path / "config.json"
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path


# Cleanup fixtures
@pytest.fixture(autouse=True)
def cleanup():
    """Drop cached settings so each test sees its own environment."""
    reset_settings()
    yield
    reset_settings()


# Test markers
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
