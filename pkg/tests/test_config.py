"""Tests for the typed experiment configuration."""

from __future__ import annotations

import pytest

from src.models.attack_result import AttackConfig, AttackKind
from src.models.config import ExperimentConfig, SeedConfig
from src.utils.constants import DEFAULT_DEEPFOOL_MAX_ITERATIONS, DEFAULT_TARGET_FPR


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.detection.target_fpr == DEFAULT_TARGET_FPR
        assert [a.name for a in config.attacks] == ["cw", "cw5", "cw9", "df", "fgsm1", "fgsm4"]
        assert config.attack("cw9").logit_kappa == pytest.approx(9.0)

    def test_from_dict_ignores_unknown_keys(self):
        config = ExperimentConfig.from_dict(
            {
                "run_dir": "runs/x",
                "library_path": "~/Music",
                "dataset": {"n_classes": 4, "colour": "red"},
                "seeds": {"data": 99},
            }
        )
        assert config.run_dir == "runs/x"
        assert config.dataset.n_classes == 4
        assert config.seeds.data == 99
        assert config.seeds.victim == SeedConfig().victim

    def test_attack_roster_from_dict(self):
        config = ExperimentConfig.from_dict(
            {"attacks": [{"name": "fgsm", "kind": "fgsm", "epsilon": 0.5}, {"name": "df", "kind": "deepfool"}]}
        )
        assert config.attack("fgsm").epsilon == 0.5
        assert config.attack("df").max_iterations == DEFAULT_DEEPFOOL_MAX_ITERATIONS

    def test_round_trip(self):
        config = ExperimentConfig.from_dict({"detection": {"distortions": ["median:5"]}, "repeats": 3})
        assert ExperimentConfig.from_dict(config.to_dict()) == config

    def test_unknown_attack_lists_configured_names(self):
        with pytest.raises(KeyError, match="cw5"):
            ExperimentConfig().attack("pgd")

    def test_seed_offset(self):
        shifted = ExperimentConfig().with_seed_offset(10)
        assert shifted.seeds.data == SeedConfig().data + 10
        assert shifted.seeds.pairing == SeedConfig().pairing + 10


class TestAttackConfig:
    def test_dict_round_trip(self):
        config = AttackConfig(name="cw5", kind=AttackKind.CW, kappa=0.5)
        assert AttackConfig.from_dict(config.to_dict()) == config

    @pytest.mark.parametrize(
        "kwargs", [{"epsilon": -0.1}, {"kappa": -1.0}, {"max_iterations": 0}, {"binary_search_steps": 0}]
    )
    def test_rejects_invalid_values(self, kwargs):
        with pytest.raises(ValueError):
            AttackConfig(name="x", kind=AttackKind.CW, **kwargs)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            AttackConfig.from_dict({"name": "x", "kind": "pgd"})
