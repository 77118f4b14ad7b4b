"""Tests for configuration validation and loading in main.py."""

from __future__ import annotations

from pathlib import Path

import pytest

from src.main import load_config, validate_config
from src.utils.constants import (
    DEFAULT_DISTORTIONS,
    DEFAULT_EPOCHS,
    DEFAULT_N_CLASSES,
    DEFAULT_TARGET_FPR,
)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("RSD_RUN_DIR", raising=False)
    monkeypatch.delenv("RSD_LOG_LEVEL", raising=False)
    monkeypatch.setattr("src.main.load_dotenv", lambda: False)


class TestValidateConfig:
    def test_valid_config_produces_no_warnings(self):
        config = {
            "detection": {"target_fpr": 0.05, "distortions": ["median:3", "bitdepth:4", "grayscale"]},
            "training": {"epochs": 3, "batch_size": 16, "learning_rate": 0.01},
            "dataset": {"n_classes": 5},
        }
        assert validate_config(config) == []

    def test_empty_config(self):
        """Empty config should produce no warnings (uses defaults)."""
        assert validate_config({}) == []

    @pytest.mark.parametrize("fpr", [0, 1, 1.5, -0.1, "low"])
    def test_target_fpr_out_of_range(self, fpr):
        config = {"detection": {"target_fpr": fpr}}
        warnings = validate_config(config)
        assert any("detection.target_fpr" in w for w in warnings)
        assert config["detection"]["target_fpr"] == DEFAULT_TARGET_FPR

    @pytest.mark.parametrize("descriptor", ["median:4", "median:1", "bitdepth:0", "bitdepth:8", "blur:3"])
    def test_invalid_distortion_falls_back(self, descriptor):
        config = {"detection": {"distortions": ["median:3", descriptor]}}
        warnings = validate_config(config)
        assert any("detection.distortions" in w for w in warnings)
        assert config["detection"]["distortions"] == list(DEFAULT_DISTORTIONS)

    def test_comma_string_distortions_accepted(self):
        assert validate_config({"detection": {"distortions": "median:5,bitdepth:3"}}) == []

    def test_empty_distortion_list(self):
        config = {"detection": {"distortions": []}}
        assert any("no distortion" in w for w in validate_config(config))

    def test_non_positive_training_values(self):
        config = {"training": {"epochs": 0, "batch_size": 16, "learning_rate": -1}}
        warnings = validate_config(config)
        assert any("training.epochs" in w for w in warnings)
        assert any("training.learning_rate" in w for w in warnings)
        assert not any("training.batch_size" in w for w in warnings)
        assert config["training"]["epochs"] == DEFAULT_EPOCHS

    @pytest.mark.parametrize("n_classes", [1, "ten", 2.5])
    def test_class_count(self, n_classes):
        config = {"dataset": {"n_classes": n_classes}}
        assert any("dataset.n_classes" in w for w in validate_config(config))
        assert config["dataset"]["n_classes"] == DEFAULT_N_CLASSES


class TestLoadConfig:
    def test_reads_yaml(self, tmp_path: Path):
        path = tmp_path / "config.yaml"
        path.write_text("run_dir: runs/a\ndataset:\n  n_classes: 4\n", encoding="utf-8")
        config = load_config(path)
        assert config["run_dir"] == "runs/a"
        assert config["dataset"]["n_classes"] == 4

    def test_empty_yaml(self, tmp_path: Path):
        path = tmp_path / "config.yaml"
        path.write_text("", encoding="utf-8")
        assert load_config(path) == {}

    def test_missing_explicit_file(self, tmp_path: Path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.yaml")

    def test_environment_overrides(self, tmp_path: Path, monkeypatch):
        path = tmp_path / "config.yaml"
        path.write_text("run_dir: runs/a\nlog_level: INFO\n", encoding="utf-8")
        monkeypatch.setenv("RSD_RUN_DIR", str(tmp_path / "from-env"))
        monkeypatch.setenv("RSD_LOG_LEVEL", "DEBUG")
        config = load_config(path)
        assert config["run_dir"] == str(tmp_path / "from-env")
        assert config["log_level"] == "DEBUG"
