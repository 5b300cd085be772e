"""
Ablation sweeps over region kinds, the consistency term, the training
stages and the supplementary axes (box source, region budget, embedding
mode, freeze depth). A failing cell is recorded and the sweep goes on.
"""

import csv
import itertools
import json
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel

from ..models.experiment import ExperimentConfig, parse_config
from ..storage.checkpoint import Checkpoint, load_checkpoint
from ..synthworld.world import SyntheticDataset
from ..utils.errors import LocovError
from ..utils.logger import engine_logger, log_error, log_execution_time
from .evaluate import load_network, run_evaluation
from .lsm import train_lsm
from .stt import train_stt


ABLATION_CSV = "ablation.csv"


class AblationRow(BaseModel):
    """One cell of the sweep and its AP summary."""
    cell: str
    regions: str
    consistency: bool
    stages: str
    box_source: str
    box_cap: int
    embedding_mode: str
    frozen_stages: int
    status: str = "ok"
    error: str = ""
    novel_ap: Optional[float] = None
    novel_ap50: Optional[float] = None
    known_ap: Optional[float] = None
    known_ap50: Optional[float] = None
    generalized_ap: Optional[float] = None
    generalized_ap50: Optional[float] = None
    generalized_novel_ap50: Optional[float] = None
    generalized_known_ap50: Optional[float] = None


ABLATION_COLUMNS = list(AblationRow.model_fields)


def cell_configs(base: ExperimentConfig) -> List[Dict]:
    """Cell overrides in sweep order; each is a dict of axis values."""
    grid = base.ablation
    axes = {
        "regions": grid.regions,
        "consistency": grid.consistency,
        "stages": grid.stages,
        "box_source": grid.box_sources or [base.regions.box_source],
        "box_cap": grid.region_budgets or [base.regions.box_cap],
        "embedding_mode": grid.embedding_modes or [base.model.embedding_mode],
        "frozen_stages": grid.frozen_stages or [base.freeze.frozen_stages],
    }
    names = list(axes)
    return [dict(zip(names, values)) for values in itertools.product(*axes.values())]


def apply_cell(base: ExperimentConfig, cell: Dict) -> ExperimentConfig:
    data = base.model_dump()
    data["regions"].update(mode=cell["regions"], box_source=cell["box_source"], box_cap=cell["box_cap"])
    data["losses"]["consistency"] = cell["consistency"]
    data["model"]["embedding_mode"] = cell["embedding_mode"]
    data["freeze"]["frozen_stages"] = cell["frozen_stages"]
    return parse_config(data)


def cell_name(cell: Dict) -> str:
    return "_".join([
        cell["regions"], "cons" if cell["consistency"] else "nocons", cell["stages"].replace("+", "-"),
        cell["box_source"], f"cap{cell['box_cap']}", cell["embedding_mode"], f"fz{cell['frozen_stages']}",
    ])


def _lsm_key(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(include={"world", "model", "regions", "losses", "lsm", "seed"}), sort_keys=True)


def _stt_only_key(config: ExperimentConfig) -> str:
    # loss settings only reach the matching stage; regions also drive detection
    return json.dumps(config.model_dump(include={"world", "model", "regions", "stt", "freeze", "seed"}), sort_keys=True)


def _fill(row: AblationRow, report) -> AblationRow:
    blocks = report.blocks
    values = {}
    for setup in ("novel", "known", "generalized"):
        if setup in blocks:
            values[f"{setup}_ap"] = blocks[setup].ap
            values[f"{setup}_ap50"] = blocks[setup].ap50
    generalized = blocks.get("generalized")
    if generalized is not None:
        for part in ("novel", "known"):
            if part in generalized.subsets:
                values[f"generalized_{part}_ap50"] = generalized.subsets[part].ap50
    return row.model_copy(update=values)


@log_execution_time("workflows.run_ablation")
def run_ablation(base: ExperimentConfig, dataset: SyntheticDataset, out_dir: Union[str, Path]) -> List[AblationRow]:
    """Run every cell, write ``ablation.csv`` and return the rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lsm_cache: Dict[str, Checkpoint] = {}
    stt_only_cache: Dict[str, AblationRow] = {}
    rows: List[AblationRow] = []
    split = base.ablation.split

    cells = cell_configs(base)
    engine_logger.info("Starting ablation sweep", cells=len(cells), split=split)
    for cell in cells:
        name = cell_name(cell)
        row = AblationRow(cell=name, **cell)
        try:
            config = apply_cell(base, cell)
            cell_dir = out_dir / "cells" / name
            if cell["stages"] == "stt_only" and _stt_only_key(config) in stt_only_cache:
                cached = stt_only_cache[_stt_only_key(config)]
                rows.append(cached.model_copy(update={"cell": name, **cell}))
                continue

            final: Optional[Checkpoint] = None
            if cell["stages"] in ("lsm+stt", "lsm_only"):
                key = _lsm_key(config)
                if key not in lsm_cache:
                    lsm_cache[key] = load_checkpoint(train_lsm(config, dataset, cell_dir).checkpoint, "LSM")
                final = lsm_cache[key]
            if cell["stages"] in ("lsm+stt", "stt_only"):
                result = train_stt(config, dataset, cell_dir, lsm=final)
                final = load_checkpoint(result.checkpoint, "STT")

            report, _ = run_evaluation(load_network(final, dataset), dataset, split)
            row = _fill(row, report)
            if cell["stages"] == "stt_only":
                stt_only_cache[_stt_only_key(config)] = row
        except (LocovError, OSError) as exc:
            log_error(exc, "ablation_cell", {"cell": name})
            row = row.model_copy(update={"status": "failed", "error": str(exc)})
        rows.append(row)

    write_ablation_csv(rows, out_dir / ABLATION_CSV)
    engine_logger.info("Ablation sweep finished", cells=len(rows),
                       failed=sum(1 for r in rows if r.status != "ok"))
    return rows


def write_ablation_csv(rows: List[AblationRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=ABLATION_COLUMNS)
        writer.writeheader()
        for row in rows:
            record = row.model_dump()
            for key, value in record.items():
                if isinstance(value, float):
                    record[key] = f"{value:.6f}"
                elif value is None:
                    record[key] = ""
            writer.writerow(record)
    return path


__all__ = [
    'ABLATION_CSV', 'ABLATION_COLUMNS', 'AblationRow',
    'cell_configs', 'apply_cell', 'cell_name', 'run_ablation', 'write_ablation_csv',
]
