"""
Unit tests for IoU, NMS, average precision and the three-setup report.
"""

import csv

import numpy as np
import pytest

from src.evaluation import (
    CSV_COLUMNS, average_precision, brute_force_average_precision, brute_force_evaluate, evaluate, iou, nms,
    read_report_json, write_report_csv, write_report_json,
)
from src.models.detection import Box, ClassInfo, Detection, GroundTruth
from src.models.report import IOU_THRESHOLDS
from src.utils.errors import LocovError


pytestmark = pytest.mark.unit


CLASSES = [
    ClassInfo(class_id=0, name="c00", tokens=[2], split="known"),
    ClassInfo(class_id=1, name="c01", tokens=[3], split="known"),
    ClassInfo(class_id=2, name="c02", tokens=[4], split="novel"),
]


def _box(x1, y1, x2, y2):
    return Box(x1=x1, y1=y1, x2=x2, y2=y2)


def _det(image_id, box, class_id, confidence):
    return Detection(image_id=image_id, box=_box(*box), class_id=class_id, confidence=confidence)


def _gt(image_id, box, class_id):
    return GroundTruth(image_id=image_id, box=_box(*box), class_id=class_id)


def _random_multiclass_instance(rng):
    """At most 10 detections and 5 ground truths over the three classes."""
    gts, dets = [], []
    for _ in range(int(rng.integers(1, 6))):
        x, y = rng.uniform(0, 40, size=2)
        w, h = rng.uniform(5, 20, size=2)
        gts.append(_gt(int(rng.integers(0, 2)), (x, y, x + w, y + h), int(rng.integers(0, 3))))
    for _ in range(int(rng.integers(0, 11))):
        if gts and rng.uniform() < 0.6:
            near = gts[int(rng.integers(len(gts)))]
            shift = rng.uniform(-3, 3, size=2)
            box = (near.box.x1 + shift[0], near.box.y1 + shift[1], near.box.x2 + shift[0], near.box.y2 + shift[1])
            image_id = near.image_id
        else:
            x, y = rng.uniform(0, 40, size=2)
            box = (x, y, x + 10, y + 10)
            image_id = int(rng.integers(0, 2))
        dets.append(_det(image_id, box, int(rng.integers(0, 3)), float(rng.integers(0, 5)) / 4))
    by_setup = {
        "novel": [d for d in dets if d.class_id == 2],
        "known": [d for d in dets if d.class_id != 2],
        "generalized": dets,
    }
    return by_setup, gts


def _random_instance(rng):
    gts, dets = [], []
    for image_id in range(int(rng.integers(1, 4))):
        for _ in range(int(rng.integers(0, 4))):
            x, y = rng.uniform(0, 50, size=2)
            w, h = rng.uniform(5, 30, size=2)
            gts.append(_gt(image_id, (x, y, x + w, y + h), 0))
        for _ in range(int(rng.integers(0, 6))):
            x, y = rng.uniform(0, 50, size=2)
            w, h = rng.uniform(5, 30, size=2)
            # coarse confidences force ties
            dets.append(_det(image_id, (x, y, x + w, y + h), 0, float(rng.integers(0, 5)) / 4))
    return dets, gts


class TestGeometry:
    """IoU and greedy suppression."""

    def test_iou_values(self):
        """Identical, disjoint and half-overlapping boxes."""
        a = _box(0, 0, 10, 10)
        assert iou(a, a) == pytest.approx(1.0)
        assert iou(a, _box(20, 20, 30, 30)) == 0.0
        assert iou(a, _box(5, 0, 15, 10)) == pytest.approx(50 / 150)

    def test_degenerate_box(self):
        """Zero-area boxes are invalid."""
        with pytest.raises(LocovError) as exc_info:
            iou(np.array([0, 0, 0, 5.0]), np.array([0, 0, 5, 5.0]))
        assert exc_info.value.code == "invalid-box"

    def test_nms_keeps_best_and_disjoint(self):
        """Overlaps above the threshold are suppressed."""
        boxes = np.array([[0, 0, 10, 10], [1, 1, 11, 11], [50, 50, 60, 60]], dtype=float)
        assert nms(boxes, np.array([0.8, 0.9, 0.7]), 0.5) == [1, 2]

    def test_nms_ties_keep_input_order(self):
        """Equal scores are resolved by position."""
        boxes = np.array([[0, 0, 10, 10], [0, 0, 10, 10]], dtype=float)
        assert nms(boxes, np.array([0.5, 0.5]), 0.5) == [0]


class TestAveragePrecision:
    """AP of one class."""

    def test_perfect(self):
        """Every ground truth found first."""
        gts = [_gt(0, (0, 0, 10, 10), 0), _gt(1, (0, 0, 10, 10), 0)]
        dets = [_det(0, (0, 0, 10, 10), 0, 0.9), _det(1, (0, 0, 10, 10), 0, 0.8)]
        assert average_precision(dets, gts) == pytest.approx(1.0)

    def test_false_positive_first(self):
        """A leading miss halves the precision of the first hit."""
        gts = [_gt(0, (0, 0, 10, 10), 0)]
        dets = [_det(0, (50, 50, 60, 60), 0, 0.9), _det(0, (0, 0, 10, 10), 0, 0.5)]
        assert average_precision(dets, gts) == pytest.approx(0.5)

    def test_duplicate_detection(self):
        """A ground truth is matched at most once."""
        gts = [_gt(0, (0, 0, 10, 10), 0)]
        dets = [_det(0, (0, 0, 10, 10), 0, 0.9), _det(0, (0, 0, 10, 10), 0, 0.8)]
        assert average_precision(dets, gts) == pytest.approx(1.0)

    def test_nothing_to_find(self):
        """No ground truth gives zero."""
        assert average_precision([_det(0, (0, 0, 1, 1), 0, 0.5)], []) == 0.0

    def test_matches_exhaustive_reference(self):
        """Agrees with the brute-force computation on 100 random instances."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            dets, gts = _random_instance(rng)
            for threshold in (0.5, 0.75):
                assert average_precision(dets, gts, threshold) == brute_force_average_precision(dets, gts, threshold)

    def test_bounded(self):
        """AP lies in [0, 1]."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            dets, gts = _random_instance(rng)
            assert 0.0 <= average_precision(dets, gts) <= 1.0


class TestEvaluate:
    """Three-setup report."""

    @pytest.fixture
    def gts(self):
        return [_gt(0, (0, 0, 10, 10), 0), _gt(0, (20, 20, 30, 30), 2), _gt(1, (0, 0, 10, 10), 1)]

    def test_empty_detections(self, gts):
        """No detections gives an all-zero report."""
        report = evaluate({"novel": [], "known": [], "generalized": []}, gts, CLASSES)
        for block in report.blocks.values():
            assert block.ap == 0.0 and block.ap50 == 0.0
        assert report.iou_thresholds == IOU_THRESHOLDS

    def test_perfect_generalized(self, gts):
        """Exact boxes with the right classes score 1 everywhere."""
        dets = [_det(g.image_id, (g.box.x1, g.box.y1, g.box.x2, g.box.y2), g.class_id, 0.9) for g in gts]
        report = evaluate({"generalized": dets}, gts, CLASSES)
        block = report.blocks["generalized"]
        assert block.ap == pytest.approx(1.0)
        assert block.subsets["novel"].ap50 == pytest.approx(1.0)
        assert block.subsets["known"].num_classes == 2

    def test_matches_exhaustive_reference_exactly(self):
        """Per-class and mean APs equal the brute-force reference bit for bit on 100 random instances."""
        rng = np.random.default_rng(31)
        for _ in range(100):
            dets_per_setup, gts = _random_multiclass_instance(rng)
            report = evaluate(dets_per_setup, gts, CLASSES, threads=1)
            reference = brute_force_evaluate(dets_per_setup, gts, CLASSES)
            for setup, block in report.blocks.items():
                expected = reference[setup]
                assert block.per_threshold == expected["per_threshold"]
                assert (block.ap, block.ap50, block.ap75) == (expected["ap"], expected["ap50"], expected["ap75"])
                scored = {c.class_id: c.per_threshold for c in block.classes if c.num_gt > 0}
                assert scored == expected["classes"]

    def test_rank_only(self):
        """Halving every confidence keeps the ranking and therefore every AP."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            dets_per_setup, gts = _random_multiclass_instance(rng)
            halved = {
                setup: [d.model_copy(update={"confidence": d.confidence / 2}) for d in dets]
                for setup, dets in dets_per_setup.items()
            }
            before = evaluate(dets_per_setup, gts, CLASSES, threads=1)
            after = evaluate(halved, gts, CLASSES, threads=1)
            for setup in before.blocks:
                assert after.blocks[setup].per_threshold == before.blocks[setup].per_threshold

    def test_trailing_false_positive(self):
        """A miss ranked below every other detection never raises AP."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            dets, gts = _random_instance(rng)
            dets = [d.model_copy(update={"confidence": 0.5 + d.confidence / 2}) for d in dets]
            miss = _det(99, (0, 0, 5, 5), 0, 0.0)
            for threshold in (0.5, 0.75):
                assert average_precision(dets + [miss], gts, threshold) <= average_precision(dets, gts, threshold)

    def test_setup_mismatch(self, gts):
        """Known-setup detections cannot carry novel classes."""
        with pytest.raises(LocovError) as exc_info:
            evaluate({"known": [_det(0, (20, 20, 30, 30), 2, 0.9)]}, gts, CLASSES)
        assert exc_info.value.code == "setup-mismatch"

    def test_confused_class_flagged(self, gts):
        """A class losing AP when all classes compete is marked confused."""
        novel_hit = _det(0, (20, 20, 30, 30), 2, 0.9)
        report = evaluate({"novel": [novel_hit], "generalized": [_det(0, (20, 20, 30, 30), 0, 0.9)]}, gts, CLASSES)
        delta = next(d for d in report.deltas if d.class_id == 2)
        assert delta.delta_ap < 0
        assert delta.confused

    def test_export(self, gts, tmp_path):
        """JSON reads back equal; the CSV has one row per setup and class."""
        report = evaluate({"novel": [], "known": [], "generalized": []}, gts, CLASSES, split="test")
        write_report_json(report, tmp_path / "eval.json")
        assert read_report_json(tmp_path / "eval.json") == report
        write_report_csv(report, tmp_path / "eval.csv")
        with open(tmp_path / "eval.csv", newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert list(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + 2 + 3
