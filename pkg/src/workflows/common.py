"""
Pieces shared by the training loops: the per-step metrics log,
checkpoint snapshots and the state dump written on a non-finite loss.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, IO, Optional, Sequence, Union

from ..autodiff import SGD
from ..network import DetectorNetwork
from ..storage.checkpoint import Checkpoint, Stage, save_checkpoint
from ..utils.errors import NonFiniteLossError
from ..utils.logger import train_logger


LSM_METRIC_KEYS = ("stage", "step", "lr", "loss_total", "grounding", "icm", "mlm", "consistency")
STT_METRIC_KEYS = ("stage", "step", "lr", "loss_total", "classification", "val_generalized_ap", "val_generalized_ap50")


class MetricsLog:
    """Line-delimited JSON, one record per step, always the same keys in the same order."""

    def __init__(self, path: Union[str, Path], keys: Sequence[str]):
        self.path = Path(path)
        self.keys = tuple(keys)
        self._handle: Optional[IO[str]] = None

    def __enter__(self) -> "MetricsLog":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8")
        return self

    def __exit__(self, *exc) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, **values: Any) -> None:
        unexpected = set(values) - set(self.keys)
        if unexpected:
            raise KeyError(f"metrics keys {sorted(unexpected)} not in the fixed key set")
        record = {key: values.get(key) for key in self.keys}
        self._handle.write(json.dumps(record) + "\n")
        self._handle.flush()


def read_metrics(path: Union[str, Path]) -> list:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


def snapshot(network: DetectorNetwork, stage: Stage, step: int, optimizer: Optional[SGD] = None,
             extra: Optional[Dict[str, Any]] = None) -> Checkpoint:
    return Checkpoint(
        stage=stage, step=step, config=network.config, params=network.state(),
        velocity=optimizer.state() if optimizer is not None else {}, extra=dict(extra or {}),
    )


def dump_nonfinite(network: DetectorNetwork, stage: Stage, step: int, components: Dict[str, float],
                   out_dir: Path) -> NonFiniteLossError:
    """Save the last finite parameters and the offending loss terms, return the error to raise."""
    out_dir.mkdir(parents=True, exist_ok=True)
    state_path = out_dir / f"nonfinite_{stage.lower()}_step{step:06d}.ckpt"
    save_checkpoint(snapshot(network, stage, step), state_path)
    report = {
        "stage": stage, "step": step, "checkpoint": state_path.name,
        "components": {k: (v if math.isfinite(v) else repr(v)) for k, v in components.items()},
    }
    report_path = state_path.with_suffix(".json")
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    train_logger.error("Non-finite loss, state dumped", stage=stage, step=step, path=str(report_path))
    return NonFiniteLossError(f"{stage} loss is not finite at step {step}", dump_path=str(report_path))


__all__ = [
    'LSM_METRIC_KEYS', 'STT_METRIC_KEYS', 'MetricsLog', 'read_metrics', 'snapshot', 'dump_nonfinite',
]
