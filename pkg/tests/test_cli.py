"""End-to-end tests of the command-line entry point."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from src.main import EXIT_FAILURE, EXIT_OK, build_parser, main

TINY_CONFIG = """\
dataset:
  n_classes: 3
  train_per_class: 20
  test_per_class: 12
  image_size: 8
training:
  epochs: 6
  batch_size: 16
  learning_rate: 0.05
  adv_epochs: 1
detection:
  distortions: [median:3, bitdepth:5]
  histogram_bins: 5
  ablation_attacks: [fgsm]
attacks:
  - name: fgsm
    kind: fgsm
    epsilon: 0.5
black_box_attacks: [fgsm]
adv_training_attacks: [fgsm]
max_attack_samples: 10
max_workers: 2
log_level: WARNING
"""


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("RSD_RUN_DIR", raising=False)
    monkeypatch.delenv("RSD_LOG_LEVEL", raising=False)
    monkeypatch.setattr("src.main.load_dotenv", lambda: False)


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path


def run(config_file: Path, run_dir: Path, *args: str) -> int:
    return main([*args, "--config", str(config_file), "--out", str(run_dir)])


class TestParser:
    def test_missing_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as info:
            main(["bogus"])
        assert info.value.code == 2

    def test_attack_needs_a_name(self):
        with pytest.raises(SystemExit) as info:
            main(["attack"])
        assert info.value.code == 2

    def test_common_flags(self):
        args = build_parser().parse_args(["stats", "--seed", "3", "--distortions", "median:5"])
        assert args.seed == 3
        assert args.model == "victim"
        assert args.distortions == "median:5"


class TestFailures:
    def test_missing_config_file(self, tmp_path: Path):
        assert main(["gen-data", "--config", str(tmp_path / "absent.yaml")]) == EXIT_FAILURE

    def test_missing_detect_input(self, config_file: Path, tmp_path: Path):
        run_dir = tmp_path / "run"
        assert run(config_file, run_dir, "detect", "--input", str(tmp_path / "absent.advt")) == EXIT_FAILURE

    def test_unknown_attack(self, config_file: Path, tmp_path: Path):
        run_dir = tmp_path / "run"
        assert run(config_file, run_dir, "gen-data") == EXIT_OK
        assert run(config_file, run_dir, "attack", "--attack", "pgd") == EXIT_FAILURE


@pytest.mark.slow
@pytest.mark.integration
def test_full_pipeline(config_file: Path, tmp_path: Path):
    run_dir = tmp_path / "run"

    assert run(config_file, run_dir, "gen-data") == EXIT_OK
    assert (run_dir / "data" / "train.advt").exists()
    assert (run_dir / "data" / "test.advt").exists()

    assert run(config_file, run_dir, "train", "--model", "victim") == EXIT_OK
    assert (run_dir / "models" / "victim.ckpt").exists()

    assert run(config_file, run_dir, "stats") == EXIT_OK
    assert (run_dir / "stats" / "victim__median3-bitdepth5.stats").exists()

    assert run(config_file, run_dir, "attack", "--attack", "fgsm") == EXIT_OK
    attack_path = run_dir / "attacks" / "victim__fgsm__white.advt"
    assert attack_path.exists()

    assert run(config_file, run_dir, "detect", "--input", str(attack_path)) == EXIT_OK
    detection = json.loads((run_dir / "detections" / "victim__fgsm__white.json").read_text(encoding="utf-8"))
    assert detection["detector"] == "ours"
    assert detection["distortions"] == "median:3,bitdepth:5"
    assert detection["verdicts"]
    assert all(0.0 <= v["score"] <= 1.0 for v in detection["verdicts"])

    test_path = run_dir / "data" / "test.advt"
    assert run(config_file, run_dir, "detect", "--input", str(test_path), "--threshold", "0") == EXIT_OK
    accepted = json.loads((run_dir / "detections" / "test.json").read_text(encoding="utf-8"))
    assert len(accepted["verdicts"]) == 36
    assert accepted["flagged"] == 0

    assert run(config_file, run_dir, "detect", "--input", str(test_path), "--detector", "fs") == EXIT_OK

    assert run(config_file, run_dir, "eval") == EXIT_OK
    report = json.loads((run_dir / "reports" / "eval.json").read_text(encoding="utf-8"))
    assert "fgsm" in report["auc"]
