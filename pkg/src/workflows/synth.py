"""
Dataset generation: world, directory and summary statistics.
"""

from pathlib import Path
from typing import Tuple, Union

from ..models.experiment import WorldConfig
from ..storage.dataset_store import save_dataset
from ..synthworld.statistics import WorldStatistics, world_statistics
from ..synthworld.world import generate_world
from ..utils.logger import engine_logger, log_execution_time


STATISTICS_NAME = "statistics.json"


@log_execution_time("workflows.synthesize")
def synthesize(world: WorldConfig, out_dir: Union[str, Path]) -> Tuple[Path, WorldStatistics]:
    dataset = generate_world(world)
    root = save_dataset(dataset, out_dir)
    stats = world_statistics(dataset)
    (root / STATISTICS_NAME).write_text(stats.model_dump_json(indent=2) + "\n", encoding="utf-8")
    engine_logger.info("Dataset ready", path=str(root),
                       train_recall=stats.splits["train"].proposal_recall if "train" in stats.splits else None)
    return root, stats


__all__ = ['STATISTICS_NAME', 'synthesize']
