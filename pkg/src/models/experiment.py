"""
Experiment configuration models.
Pydantic models for the synthetic world, the model, both training stages
and the freezing policy, loaded from a single JSON document.
"""

import json
from pathlib import Path
from typing import List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..utils.errors import ConfigError


RegionMode = Literal["box", "grid", "both"]
BoxSource = Literal["proposals", "ann_known", "ann_all"]
EmbeddingMode = Literal["frozen", "finetune", "scratch"]
StagePlan = Literal["lsm+stt", "stt_only", "lsm_only"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class WorldConfig(_Strict):
    """Synthetic open-vocabulary world."""
    num_known: int = Field(default=20, ge=1)
    num_novel: int = Field(default=6, ge=1)
    latent_dim: int = Field(default=64, ge=1, description="Dimension of the latent prototype space")
    feature_dim: int = Field(default=48, ge=1, description="Raw region-feature dimension F")
    train_images: int = Field(default=2000, ge=1)
    val_images: int = Field(default=200, ge=1)
    test_images: int = Field(default=200, ge=1)
    objects_min: int = Field(default=1, ge=1)
    objects_max: int = Field(default=3, ge=1)
    caption_min: int = Field(default=6, ge=1)
    caption_max: int = Field(default=12, ge=1)
    noise_std: float = Field(default=0.1, ge=0)
    background_std: float = Field(default=0.5, ge=0)
    distractor_tokens: int = Field(default=30, ge=1)
    multi_token_every: int = Field(default=4, ge=0, description="Every n-th class name splits into two tokens; 0 disables")
    image_size: float = Field(default=100.0, gt=0)
    grid_size: int = Field(default=10, ge=1)
    box_min: float = Field(default=15.0, gt=0)
    box_max: float = Field(default=45.0, gt=0)
    box_jitter: float = Field(default=0.08, ge=0, lt=0.5, description="Jitter as a fraction of box extent")
    noise_proposals: int = Field(default=6, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def check_consistency(self):
        if self.objects_min > self.objects_max:
            raise ValueError("objects_min exceeds objects_max")
        if self.caption_min > self.caption_max:
            raise ValueError("caption_min exceeds caption_max")
        tokens_per_name = 2 if self.multi_token_every else 1
        if self.caption_min < self.objects_max * tokens_per_name:
            raise ValueError("caption_min is shorter than the class tokens of objects_max objects")
        if self.box_min > self.box_max or self.box_max >= self.image_size:
            raise ValueError("box size range must fit inside the image")
        return self

    @property
    def num_classes(self) -> int:
        return self.num_known + self.num_novel


class ModelConfig(_Strict):
    """Embedding, encoder and cross-attention dimensions."""
    embed_dim: int = Field(default=64, ge=1, description="Text-embedding dimension D")
    fusion_layers: int = Field(default=6, ge=1)
    fusion_heads: int = Field(default=8, ge=1)
    ffn_dim: int = Field(default=128, ge=1)
    encoder_stages: int = Field(default=4, ge=1)
    embedding_std: float = Field(default=0.02, gt=0)
    embedding_mode: EmbeddingMode = "frozen"
    init_std: float = Field(default=0.02, gt=0)

    @model_validator(mode="after")
    def check_heads(self):
        if self.embed_dim % self.fusion_heads:
            raise ValueError("embed_dim must be divisible by fusion_heads")
        return self


class RegionConfig(_Strict):
    """Which image regions feed the matching stage."""
    mode: RegionMode = "both"
    box_cap: int = Field(default=100, ge=1)
    objectness_threshold: float = Field(default=0.7, ge=0, le=1)
    box_source: BoxSource = "proposals"

    @property
    def use_box(self) -> bool:
        return self.mode in ("box", "both")

    @property
    def use_grid(self) -> bool:
        return self.mode in ("grid", "both")


class LossToggles(_Strict):
    """Terms of the matching-stage objective."""
    grounding: bool = True
    icm: bool = True
    mlm: bool = True
    consistency: bool = True
    consistency_bidirectional: bool = False
    mask_ratio: float = Field(default=0.15, gt=0, le=1)


class ScheduleConfig(_Strict):
    """Step-decay learning-rate schedule."""
    base_rate: float = Field(default=0.01, gt=0)
    decay_steps: List[int] = Field(default_factory=list)
    decay_factor: float = Field(default=10.0, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)

    @field_validator("decay_steps")
    def strictly_increasing(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])) or any(s < 1 for s in v):
            raise ValueError("decay_steps must be positive and strictly increasing")
        return v


class FreezePolicy(_Strict):
    """Parameter groups held fixed during task tuning."""
    frozen_stages: int = Field(default=2, ge=0, description="Encoder stages 1..S are frozen")
    freeze_projection: bool = True
    freeze_embeddings: bool = True

    def group_names(self, encoder_stages: int) -> List[str]:
        names = [f"encoder.stage{i}" for i in range(1, min(self.frozen_stages, encoder_stages) + 1)]
        if self.freeze_projection:
            names.append("projection")
        if self.freeze_embeddings:
            names.append("embeddings")
        return names

    @classmethod
    def everything(cls, encoder_stages: int = 4) -> "FreezePolicy":
        return cls(frozen_stages=encoder_stages, freeze_projection=True, freeze_embeddings=True)


class LSMConfig(_Strict):
    """Matching-stage training loop."""
    steps: int = Field(default=400, ge=0)
    batch_size: int = Field(default=32, ge=1)
    schedule: ScheduleConfig = Field(default_factory=lambda: ScheduleConfig(base_rate=0.01, decay_steps=[200, 300]))
    checkpoint_every: int = Field(default=100, ge=0)


class STTConfig(_Strict):
    """Task-tuning loop, early stopping and inference post-processing."""
    steps: int = Field(default=300, ge=0)
    images_per_batch: int = Field(default=16, ge=1)
    schedule: ScheduleConfig = Field(default_factory=lambda: ScheduleConfig(base_rate=0.005, decay_steps=[200]))
    foreground_iou: float = Field(default=0.5, ge=0, le=1)
    eval_every: int = Field(default=50, ge=1)
    patience: int = Field(default=3, ge=1)
    score_threshold: float = Field(default=0.05, ge=0, le=1)
    nms_iou: float = Field(default=0.5, ge=0, le=1)
    checkpoint_every: int = Field(default=100, ge=0)


class AblationGrid(_Strict):
    """Axes swept by the ablation command; empty lists keep the base value."""
    regions: List[RegionMode] = Field(default_factory=lambda: ["both", "box", "grid"], min_length=1)
    consistency: List[bool] = Field(default_factory=lambda: [True, False], min_length=1)
    stages: List[StagePlan] = Field(default_factory=lambda: ["lsm+stt", "stt_only", "lsm_only"], min_length=1)
    box_sources: List[BoxSource] = Field(default_factory=list)
    region_budgets: List[int] = Field(default_factory=list, description="Box-region caps")
    embedding_modes: List[EmbeddingMode] = Field(default_factory=list)
    frozen_stages: List[int] = Field(default_factory=list)
    split: str = "test"

    @field_validator("region_budgets", "frozen_stages")
    def nonnegative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("budgets and stage counts must be nonnegative")
        return v


class ExperimentConfig(_Strict):
    """Complete experiment description."""
    world: WorldConfig = Field(default_factory=WorldConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    regions: RegionConfig = Field(default_factory=RegionConfig)
    losses: LossToggles = Field(default_factory=LossToggles)
    lsm: LSMConfig = Field(default_factory=LSMConfig)
    stt: STTConfig = Field(default_factory=STTConfig)
    freeze: FreezePolicy = Field(default_factory=FreezePolicy)
    ablation: AblationGrid = Field(default_factory=AblationGrid)
    seed: int = 0
    output_dir: str = "runs/default"

    @model_validator(mode="after")
    def check_toggles(self):
        if not any((self.losses.grounding, self.losses.icm, self.losses.mlm, self.losses.consistency)):
            raise ValueError("at least one matching-stage loss must be enabled")
        if self.regions.mode == "grid" and self.regions.box_source != "proposals":
            raise ValueError("box_source has no effect in grid-only mode")
        if self.freeze.frozen_stages > self.model.encoder_stages:
            raise ValueError("freeze.frozen_stages exceeds model.encoder_stages")
        return self


def _first_error_field(exc: ValidationError) -> str:
    errors = exc.errors()
    if not errors:
        return ""
    return ".".join(str(part) for part in errors[0].get("loc", ()))


def parse_config(data: Union[dict, str]) -> ExperimentConfig:
    """Validate a config mapping or JSON string, raising ConfigError."""
    try:
        if isinstance(data, str):
            return ExperimentConfig.model_validate_json(data)
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0] if exc.errors() else {}
        raise ConfigError(first.get("msg", str(exc)), field=_first_error_field(exc) or None) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field="config") from exc
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}", field="config") from exc
    return parse_config(text)


__all__ = [
    'WorldConfig', 'ModelConfig', 'RegionConfig', 'LossToggles', 'ScheduleConfig',
    'FreezePolicy', 'LSMConfig', 'STTConfig', 'AblationGrid', 'ExperimentConfig',
    'parse_config', 'load_config',
]
