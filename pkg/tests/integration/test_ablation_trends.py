"""
Slow end-to-end trend checks on the reduced desk world in configs/trend.json.

One ablation sweep is shared by the whole module: box+grid and grid-only
regions, consistency on and off, and the three stage plans.
"""

from pathlib import Path

import numpy as np
import pytest

from src.detector.classifier import classify_regions
from src.models.experiment import load_config
from src.network import detection_regions
from src.storage import load_checkpoint
from src.synthworld.world import generate_world
from src.workflows.ablation import run_ablation
from src.workflows.evaluate import load_network, run_evaluation
from src.workflows.stt import STT_CHECKPOINT


pytestmark = [pytest.mark.integration, pytest.mark.slow]

TREND_CONFIG = Path(__file__).resolve().parents[2] / "configs" / "trend.json"

# thresholds in AP points, compared as fractions
ZERO_SHOT_CEILING = 0.02
TWO_STAGE_FACTOR = 5.0
KNOWN_TOLERANCE = 0.10
SINGLE_STAGE_SHARE = 0.20


@pytest.fixture(scope="module")
def trend_config():
    return load_config(TREND_CONFIG)


@pytest.fixture(scope="module")
def trend_dataset(trend_config):
    return generate_world(trend_config.world)


@pytest.fixture(scope="module")
def sweep(trend_config, trend_dataset, tmp_path_factory):
    """Rows keyed by (regions, consistency, stages), plus the sweep directory."""
    out_dir = tmp_path_factory.mktemp("trend_sweep")
    rows = run_ablation(trend_config, trend_dataset, out_dir)
    assert all(r.status == "ok" for r in rows), [r.error for r in rows if r.status != "ok"]
    return {(r.regions, r.consistency, r.stages): r for r in rows}, out_dir


def _row(sweep, regions="both", consistency=True, stages="lsm+stt"):
    rows, _ = sweep
    return rows[(regions, consistency, stages)]


class TestTwoStageTrend:
    """Caption matching followed by task tuning against either stage alone."""

    def test_tuning_alone_misses_novel_classes(self, sweep):
        """Without caption matching novel classes are barely found."""
        assert _row(sweep, stages="stt_only").novel_ap50 < ZERO_SHOT_CEILING

    def test_two_stages_multiply_novel_ap50(self, sweep):
        """Both stages together find novel classes several times better than tuning alone."""
        combined = _row(sweep).novel_ap50
        alone = _row(sweep, stages="stt_only").novel_ap50
        assert combined > alone
        assert combined >= TWO_STAGE_FACTOR * alone

    def test_known_classes_hold(self, sweep):
        """Known-class AP50 stays within 10% of tuning alone."""
        combined = _row(sweep).known_ap50
        alone = _row(sweep, stages="stt_only").known_ap50
        assert abs(combined - alone) <= KNOWN_TOLERANCE * alone

    @pytest.mark.parametrize("stages", ["lsm_only", "stt_only"])
    def test_single_stage_share(self, sweep, stages):
        """Either stage alone reaches under a fifth of the combined novel AP50."""
        assert _row(sweep, stages=stages).novel_ap50 < SINGLE_STAGE_SHARE * _row(sweep).novel_ap50


class TestAblationTrend:
    """Region kinds and the consistency term."""

    def test_box_and_grid_beat_grid_alone(self, sweep):
        """Adding box regions never hurts novel AP50."""
        assert _row(sweep, regions="both").novel_ap50 >= _row(sweep, regions="grid").novel_ap50

    def test_consistency_helps(self, sweep):
        """Turning the consistency term on never hurts novel AP50."""
        assert _row(sweep, consistency=True).novel_ap50 >= _row(sweep, consistency=False).novel_ap50


class TestSetupCoherence:
    """Constrained and generalized setups over one evaluated model."""

    @pytest.fixture(scope="class")
    def network(self, sweep, trend_dataset):
        row = _row(sweep)
        _, out_dir = sweep
        checkpoint = load_checkpoint(out_dir / "cells" / row.cell / STT_CHECKPOINT, "STT")
        return load_network(checkpoint, trend_dataset)

    def test_novel_argmax_survives_all_classes(self, network, trend_dataset):
        """Among novel classes the winner is the same with or without known competitors."""
        catalog = network.catalog
        all_ids = catalog.ids("generalized").tolist()
        novel_columns = [all_ids.index(i) for i in catalog.ids("novel").tolist()]
        checked = 0
        for image in trend_dataset.split("test"):
            regions = network.encode_regions(detection_regions(image, network.config.regions))
            if regions.box_features.shape[0] == 0:
                continue
            novel = classify_regions(regions.box_features, catalog.embeddings("novel")).data[:, :-1]
            general = classify_regions(regions.box_features, catalog.embeddings("generalized")).data
            np.testing.assert_array_equal(novel.argmax(axis=1), general[:, novel_columns].argmax(axis=1))
            checked += novel.shape[0]
        assert checked > 0

    def test_known_ap_drops_with_novel_competitors(self, network, trend_dataset):
        """Known classes score no better when novel classes compete for the same regions."""
        report, _ = run_evaluation(network, trend_dataset, "test")
        assert report.blocks["generalized"].subsets["known"].ap <= report.blocks["known"].ap
