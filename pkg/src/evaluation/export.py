"""
Evaluation report export: JSON document plus a per-class CSV table.
"""

import csv
from pathlib import Path
from typing import Union

from ..models.report import EvalReport


CSV_COLUMNS = [
    "setup", "class_id", "name", "split", "num_gt",
    "ap", "ap50", "ap75", "ap_pct", "ap50_pct", "ap75_pct",
    "delta_ap", "confused",
]


def write_report_json(report: EvalReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def read_report_json(path: Union[str, Path]) -> EvalReport:
    return EvalReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_report_csv(report: EvalReport, path: Union[str, Path]) -> Path:
    """One row per (setup, class); AP kept as a fraction and in points."""
    path = Path(path)
    deltas = {d.class_id: d for d in report.deltas}
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for setup, block in report.blocks.items():
            for c in block.classes:
                delta = deltas.get(c.class_id)
                writer.writerow({
                    "setup": setup, "class_id": c.class_id, "name": c.name, "split": c.split,
                    "num_gt": c.num_gt,
                    "ap": f"{c.ap:.6f}", "ap50": f"{c.ap50:.6f}", "ap75": f"{c.ap75:.6f}",
                    "ap_pct": f"{100 * c.ap:.2f}", "ap50_pct": f"{100 * c.ap50:.2f}",
                    "ap75_pct": f"{100 * c.ap75:.2f}",
                    "delta_ap": f"{delta.delta_ap:.6f}" if delta and setup != "generalized" else "",
                    "confused": str(delta.confused).lower() if delta and setup != "generalized" else "",
                })
    return path


__all__ = ['CSV_COLUMNS', 'write_report_json', 'read_report_json', 'write_report_csv']
