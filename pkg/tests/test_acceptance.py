"""Desk-scale acceptance runs on the default synthetic benchmark.

One module-scoped runner trains the default victim and crafts each attack set
once; the tests read the tables it produces. Every test here is slow.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.core.experiment import VICTIM, ExperimentRunner
from src.core.trainer import accuracy
from src.models.attack_result import AttackMode, AttackSet
from src.models.config import ExperimentConfig
from src.models.dataset import Split

pytestmark = [pytest.mark.slow, pytest.mark.integration]


def l2_by_source(attack_set: AttackSet) -> dict[int, float]:
    return {r.source_index: r.l2_norm for r in attack_set.results}


def matched_l2(first: AttackSet, second: AttackSet) -> tuple[np.ndarray, np.ndarray]:
    """L2 norms of both sets on the sources both attacks fooled the victim with."""
    a, b = l2_by_source(first), l2_by_source(second)
    common = sorted(set(a) & set(b))
    return np.array([a[i] for i in common]), np.array([b[i] for i in common])


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory: pytest.TempPathFactory) -> ExperimentRunner:
    run_dir: Path = tmp_path_factory.mktemp("benchmark")
    config = ExperimentConfig.from_dict(
        {
            "run_dir": str(run_dir),
            "black_box_attacks": [],
            "adv_training_attacks": ["fgsm4"],
            "max_attack_samples": 50,
        }
    )
    return ExperimentRunner(config)


@pytest.fixture(scope="module")
def white_box_auc(benchmark: ExperimentRunner) -> dict:
    return benchmark.evaluate(VICTIM, attacks=["cw", "df"])["auc"]


def white_box_set(runner: ExperimentRunner, attack: str) -> AttackSet:
    return runner.attack_set(VICTIM, attack, AttackMode.WHITE_BOX)


class TestVictim:
    def test_held_out_accuracy_floor(self, benchmark: ExperimentRunner):
        assert accuracy(benchmark.network(VICTIM), benchmark.dataset(Split.TEST)) >= 0.90


class TestSeparation:
    def test_cw_scores_separate(self, white_box_auc: dict):
        row = white_box_auc["cw"]
        assert row["ours_median_legitimate"] >= 0.9
        assert row["ours_median_adversarial"] <= 0.5
        assert row["ours"] >= 0.90

    @pytest.mark.parametrize("attack", ["cw", "df"])
    def test_beats_feature_squeezing_on_fine_attacks(self, white_box_auc: dict, attack: str):
        assert white_box_auc[attack]["ours"] > white_box_auc[attack]["fs"]


class TestPerturbationSize:
    @pytest.mark.parametrize("fgsm", ["fgsm1", "fgsm4"])
    def test_deepfool_finer_than_fgsm(self, benchmark: ExperimentRunner, fgsm: str):
        deepfool, coarse = matched_l2(white_box_set(benchmark, "df"), white_box_set(benchmark, fgsm))
        assert len(deepfool) >= 5
        assert np.mean(deepfool <= coarse) >= 0.8

    def test_cw_finer_than_deepfool(self, benchmark: ExperimentRunner):
        cw, deepfool = matched_l2(white_box_set(benchmark, "cw"), white_box_set(benchmark, "df"))
        assert len(cw) >= 5
        assert cw.mean() <= deepfool.mean()


class TestAdversarialTraining:
    def test_robustness_gain_and_clean_cost(self, benchmark: ExperimentRunner):
        table = benchmark.adversarial_training_table({})
        clean = table["clean_accuracy"]
        assert clean["before"] - clean["after"] <= 0.05
        fgsm4 = table["attacks"]["fgsm4"]
        assert fgsm4["accuracy_after"] - fgsm4["accuracy_before"] >= 0.10


class TestCalibration:
    def test_five_percent_threshold_holds_on_held_out_split(self, benchmark: ExperimentRunner):
        table = benchmark.black_box_table({})
        assert table["held_out_size"] >= 500
        for detector, rate in table["held_out_rejection"].items():
            assert 0.03 <= rate <= 0.07, detector
