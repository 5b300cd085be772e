"""
Finite-difference suite over every loss at reduced dimensions.

Each check builds a small random instance, backpropagates once and
compares the analytic gradient of every parameter tensor with central
differences. Results are aggregated per (check, parameter group) as the
largest relative error over all instances.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..autodiff import Tensor, compare_gradients, parameter
from ..autodiff.gradcheck import DEFAULT_ABS_FLOOR, DEFAULT_STEP, DEFAULT_TOLERANCE
from ..autodiff.optim import all_tensors
from ..detector.classifier import stt_loss
from ..embeddings.layers import EmbeddingTable
from ..fusion.model import CrossAttentionModel
from ..fusion.objectives import consistency_loss, icm_loss, lsm_total_loss, mask_tokens, match_distribution, mlm_loss
from ..matching.grounding import batch_similarity, total_grounding_loss
from ..models.detection import BACKGROUND_ID
from ..models.experiment import ExperimentConfig, LossToggles, ModelConfig, WorldConfig
from ..network import DetectorNetwork
from ..regions.batching import RegionBatch
from ..synthworld.world import WorldGenerator
from ..utils.errors import LocovError
from ..utils.logger import engine_logger, log_execution_time, log_gradcheck
from .lsm import LSMBatch, lsm_terms, pre_fusion_targets


CHECKS: Tuple[str, ...] = ("grounding", "icm", "mlm", "consistency", "lsm_total", "stt")

# Analytic-gradient tamper hook: (check, "group.param", grad) -> grad
CorruptHook = Callable[[str, str, np.ndarray], np.ndarray]


class GradcheckSettings(BaseModel):
    """Instance sizes for the suite."""
    dim: int = Field(default=8, ge=2)
    batch: int = Field(default=3, ge=2)
    words: int = Field(default=4, ge=2)
    regions: int = Field(default=3, ge=2)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=2, ge=1)
    ffn_dim: int = Field(default=8, ge=1)
    vocab: int = Field(default=12, ge=4)
    init_std: float = Field(default=0.3, gt=0)
    instances: int = Field(default=20, ge=1)
    max_coords: int = Field(default=4, ge=1)
    max_tensors_per_group: int = Field(default=4, ge=1)
    step: float = DEFAULT_STEP
    tolerance: float = DEFAULT_TOLERANCE
    abs_floor: float = DEFAULT_ABS_FLOOR


class GradcheckEntry(BaseModel):
    check: str
    group: str
    max_rel_error: float
    passed: bool
    checked: int


class GradcheckReport(BaseModel):
    entries: List[GradcheckEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Vacuously true when nothing was checked."""
        return all(e.passed for e in self.entries)

    @property
    def failures(self) -> List[GradcheckEntry]:
        return [e for e in self.entries if not e.passed]


@dataclass
class Instance:
    """A loss closure and the tensors to check, keyed ``group.param``."""
    loss_fn: Callable[[], Tensor]
    params: Dict[str, Tensor]


# ---------------------------------------------------------------------- #
def _inputs(rng: np.random.Generator, s: GradcheckSettings):
    regions = parameter(rng.normal(size=(s.batch, s.regions, s.dim)), name="inputs.regions")
    grid = parameter(rng.normal(size=(s.batch, s.regions + 1, s.dim)), name="inputs.grid")
    words = parameter(rng.normal(size=(s.batch, s.words, s.dim)), name="inputs.words")
    region_mask = np.ones((s.batch, s.regions), dtype=bool)
    region_mask[-1, -1] = False
    grid_mask = np.ones((s.batch, s.regions + 1), dtype=bool)
    word_mask = np.ones((s.batch, s.words), dtype=bool)
    word_mask[-1, -1] = False
    return regions, region_mask, grid, grid_mask, words, word_mask


def _fusion(rng: np.random.Generator, s: GradcheckSettings) -> CrossAttentionModel:
    return CrossAttentionModel(s.dim, s.layers, s.heads, s.ffn_dim, s.words, rng, init_std=s.init_std)


def _with_inputs(extra: Dict[str, Tensor], *tensors: Tensor) -> Dict[str, Tensor]:
    params = {t.name: t for t in tensors}
    params.update(extra)
    return params


def _grounding(rng, s, toggles) -> Instance:
    regions, rmask, grid, gmask, words, wmask = _inputs(rng, s)

    def loss_fn():
        box = batch_similarity(RegionBatch(regions, rmask, "box"), words, wmask)
        cells = batch_similarity(RegionBatch(grid, gmask, "grid"), words, wmask)
        return total_grounding_loss(box, cells)

    return Instance(loss_fn, _with_inputs({}, regions, grid, words))


def _icm(rng, s, toggles) -> Instance:
    regions, rmask, grid, gmask, words, wmask = _inputs(rng, s)
    fusion = _fusion(rng, s)

    def loss_fn():
        return icm_loss(fusion.scores(regions, rmask, words, wmask)) + \
            icm_loss(fusion.scores(grid, gmask, words, wmask))

    return Instance(loss_fn, _with_inputs(all_tensors([fusion.group]), regions, grid, words))


def _mlm(rng, s, toggles) -> Instance:
    regions, rmask, _, _, _, _ = _inputs(rng, s)
    fusion = _fusion(rng, s)
    table = EmbeddingTable.initialise(s.vocab, s.dim, 0.5, rng, trainable=True)
    ids = rng.integers(2, s.vocab, size=(s.batch, s.words))
    ids[-1, -1] = 0
    masked = mask_tokens(ids, rng, 0.3)

    def loss_fn():
        return mlm_loss(masked, RegionBatch(regions, rmask, "box"), fusion, table)

    return Instance(loss_fn, _with_inputs(all_tensors([fusion.group, table.group]), regions))


def _consistency(rng, s, toggles) -> Instance:
    regions, rmask, grid, gmask, words, wmask = _inputs(rng, s)
    fusion = _fusion(rng, s)

    def pre_fusion():
        return (match_distribution(batch_similarity(RegionBatch(regions, rmask, "box"), words, wmask)),
                match_distribution(batch_similarity(RegionBatch(grid, gmask, "grid"), words, wmask)))

    # a stop-gradient target is a constant of the base point for the differences too
    frozen = None if toggles.consistency_bidirectional else tuple(p.detach() for p in pre_fusion())

    def loss_fn():
        p_box, p_grid = frozen or pre_fusion()
        q_box = match_distribution(fusion.scores(regions, rmask, words, wmask))
        q_grid = match_distribution(fusion.scores(grid, gmask, words, wmask))
        return consistency_loss(p_box, p_grid, q_box, q_grid, bidirectional=toggles.consistency_bidirectional)

    return Instance(loss_fn, _with_inputs(all_tensors([fusion.group]), regions, grid, words))


def _tiny_network(rng: np.random.Generator, s: GradcheckSettings, toggles: LossToggles) -> DetectorNetwork:
    world = WorldConfig(
        num_known=3, num_novel=1, latent_dim=4, feature_dim=6, objects_max=2,
        caption_min=4, caption_max=4, distractor_tokens=4, multi_token_every=2,
        image_size=10.0, grid_size=2, box_min=2.0, box_max=5.0,
    )
    config = ExperimentConfig(
        world=world,
        model=ModelConfig(
            embed_dim=s.dim, fusion_layers=s.layers, fusion_heads=s.heads, ffn_dim=s.ffn_dim,
            encoder_stages=2, embedding_std=0.5, embedding_mode="finetune", init_std=s.init_std,
        ),
        losses=toggles,
        seed=int(rng.integers(2 ** 31)),
    )
    generator = WorldGenerator(world)
    network = DetectorNetwork.build(config, generator.vocabulary, generator.classes(), world.feature_dim, s.words)
    for group in network.groups():
        group.set_trainable(True)
    return network


def _lsm_total(rng, s, toggles) -> Instance:
    toggles = LossToggles(consistency_bidirectional=toggles.consistency_bidirectional, mask_ratio=0.3)
    network = _tiny_network(rng, s, toggles)
    feature_dim = network.projection.in_dim
    ids = rng.integers(2, network.table.vocab_size, size=(s.batch, s.words))
    ids[-1, -1] = 0
    box_mask = np.ones((s.batch, s.regions), dtype=bool)
    box_mask[-1, -1] = False
    batch = LSMBatch(ids, {
        "box": RegionBatch(Tensor(rng.normal(size=(s.batch, s.regions, feature_dim))), box_mask, "box"),
        "grid": RegionBatch(Tensor(rng.normal(size=(s.batch, 4, feature_dim))), np.ones((s.batch, 4), dtype=bool), "grid"),
    })
    mask_seed = int(rng.integers(2 ** 31))
    targets = None if toggles.consistency_bidirectional else pre_fusion_targets(network, batch)

    def loss_fn():
        terms = lsm_terms(network, batch, toggles, np.random.default_rng(mask_seed), targets=targets)
        return lsm_total_loss(terms["grounding"], terms["icm"], terms["mlm"], terms["consistency"])

    return Instance(loss_fn, all_tensors(network.groups()))


def _stt(rng, s, toggles) -> Instance:
    network = _tiny_network(rng, s, toggles)
    known = network.catalog.ids("known")
    labels = np.concatenate([known, [BACKGROUND_ID, BACKGROUND_ID]])
    features = rng.normal(size=(len(labels), network.projection.in_dim))

    def loss_fn():
        return stt_loss(network.encode(Tensor(features)), labels, network.catalog)

    return Instance(loss_fn, all_tensors(network.stt_groups()))


_BUILDERS = {
    "grounding": _grounding,
    "icm": _icm,
    "mlm": _mlm,
    "consistency": _consistency,
    "lsm_total": _lsm_total,
    "stt": _stt,
}


def _group_of(name: str) -> str:
    return name.rsplit(".", 1)[0] if name.startswith(("inputs.", "encoder.")) else name.split(".", 1)[0]


def _sample_tensors(params: Dict[str, Tensor], limit: int, rng: np.random.Generator) -> Dict[str, Tensor]:
    """At most ``limit`` tensors per group; the first name in order is always kept."""
    by_group: Dict[str, List[str]] = {}
    for name in sorted(params):
        by_group.setdefault(_group_of(name), []).append(name)
    chosen = []
    for names in by_group.values():
        if len(names) <= limit:
            chosen.extend(names)
        else:
            rest = rng.choice(len(names) - 1, size=limit - 1, replace=False) + 1
            chosen.extend([names[0]] + [names[i] for i in sorted(rest)])
    return {name: params[name] for name in chosen}


@log_execution_time("workflows.run_gradcheck")
def run_gradcheck(config: Optional[ExperimentConfig] = None, settings: Optional[GradcheckSettings] = None,
                  checks: Sequence[str] = CHECKS, corrupt: Optional[CorruptHook] = None) -> GradcheckReport:
    """Run the named checks; an empty ``checks`` is a vacuous pass."""
    config = config or ExperimentConfig()
    settings = settings or GradcheckSettings()
    unknown = [c for c in checks if c not in _BUILDERS]
    if unknown:
        raise LocovError("invalid-config", f"unknown gradient checks {unknown}")

    worst: Dict[Tuple[str, str], GradcheckEntry] = {}
    for check_index, check in enumerate(checks):
        for instance_index in range(settings.instances):
            rng = np.random.default_rng([config.seed, check_index, instance_index])
            instance = _BUILDERS[check](rng, settings, config.losses)
            params = _sample_tensors(instance.params, settings.max_tensors_per_group, rng)
            hook = (lambda name, grad, _check=check: corrupt(_check, name, grad)) if corrupt else None
            results = compare_gradients(
                instance.loss_fn, params, step=settings.step, tolerance=settings.tolerance,
                abs_floor=settings.abs_floor, max_coords=settings.max_coords, rng=rng, corrupt=hook,
            )
            for r in results:
                key = (check, _group_of(r.name))
                previous = worst.get(key)
                checked = r.checked + (previous.checked if previous else 0)
                error = max(r.max_rel_error, previous.max_rel_error if previous else 0.0)
                worst[key] = GradcheckEntry(
                    check=check, group=key[1], max_rel_error=error,
                    passed=error <= settings.tolerance, checked=checked,
                )

    report = GradcheckReport(entries=list(worst.values()))
    for entry in report.entries:
        log_gradcheck(entry.check, entry.group, entry.max_rel_error, entry.passed)
    engine_logger.info("Gradient suite finished", checks=list(checks), passed=report.passed,
                       failures=[f"{e.check}/{e.group}" for e in report.failures])
    return report


__all__ = [
    'CHECKS', 'CorruptHook', 'GradcheckSettings', 'GradcheckEntry', 'GradcheckReport', 'run_gradcheck',
]
