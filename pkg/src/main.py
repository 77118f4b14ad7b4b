"""Replica Signature Detector -- command-line entry point."""

from __future__ import annotations

import argparse
import os
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from dotenv import load_dotenv
from tqdm import tqdm

from src.utils.constants import (
    APP_NAME,
    APP_VERSION,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CONFIG_FILENAME,
    DEFAULT_DISTORTIONS,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_N_CLASSES,
    DEFAULT_TARGET_FPR,
    ENV_LOG_LEVEL,
    ENV_RUN_DIR,
    MAX_BIT_DEPTH,
    MIN_BIT_DEPTH,
)
from src.utils.logger import get_logger, setup_logger

EXIT_OK = 0
EXIT_FAILURE = 1


def _invalid_distortion(descriptor: Any) -> str | None:
    """Reason a distortion descriptor is unusable, or None when it is fine."""
    from src.models.distortion import DistortionKind, DistortionSpec

    try:
        spec = DistortionSpec.parse(str(descriptor))
    except ValueError as e:
        return str(e)
    value = spec.parameter or 0
    if spec.kind is DistortionKind.MEDIAN and (value < 3 or value % 2 == 0):
        return f"median window must be odd and >= 3, got {value}"
    if spec.kind is DistortionKind.BIT_DEPTH and not MIN_BIT_DEPTH <= value <= MAX_BIT_DEPTH:
        return f"bit depth must lie in [{MIN_BIT_DEPTH}, {MAX_BIT_DEPTH}], got {value}"
    return None


def _section(config: dict, name: str) -> dict:
    section = config.get(name)
    return section if isinstance(section, dict) else {}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(config: dict) -> list[str]:
    """Validate configuration values and return a list of warnings.

    Invalid values are replaced by their defaults in place. Checks:
    - target FPR lies in (0, 1)
    - every distortion descriptor parses, median windows are odd and >= 3,
      bit depths lie in [1, 7]
    - epochs, batch size and learning rate are positive
    - at least two classes

    Args:
        config: Raw configuration dictionary (nested sections as dicts).

    Returns:
        List of human-readable warning strings. Empty if all checks pass.
    """
    warnings: list[str] = []

    detection = _section(config, "detection")
    target_fpr = detection.get("target_fpr", DEFAULT_TARGET_FPR)
    if not _is_number(target_fpr) or not 0 < target_fpr < 1:
        warnings.append(
            f"detection.target_fpr must lie in (0, 1), got {target_fpr!r}. "
            f"Using default ({DEFAULT_TARGET_FPR})."
        )
        detection["target_fpr"] = DEFAULT_TARGET_FPR

    distortions = detection.get("distortions", list(DEFAULT_DISTORTIONS))
    if isinstance(distortions, str):
        distortions = distortions.split(",")
    if not isinstance(distortions, list) or not distortions:
        reasons = ["no distortion configured"]
    else:
        reasons = [r for r in (_invalid_distortion(d) for d in distortions) if r]
    if reasons:
        warnings.append(
            f"detection.distortions invalid ({'; '.join(reasons)}). "
            f"Using default ({','.join(DEFAULT_DISTORTIONS)})."
        )
        detection["distortions"] = list(DEFAULT_DISTORTIONS)
    if detection:
        config["detection"] = detection

    training = _section(config, "training")
    for key, default in (
        ("epochs", DEFAULT_EPOCHS),
        ("batch_size", DEFAULT_BATCH_SIZE),
        ("learning_rate", DEFAULT_LEARNING_RATE),
    ):
        value = training.get(key, default)
        if not _is_number(value) or value <= 0:
            warnings.append(f"training.{key} must be positive, got {value!r}. Using default ({default}).")
            training[key] = default
    if training:
        config["training"] = training

    dataset = _section(config, "dataset")
    n_classes = dataset.get("n_classes", DEFAULT_N_CLASSES)
    if not isinstance(n_classes, int) or n_classes < 2:
        warnings.append(
            f"dataset.n_classes must be an integer >= 2, got {n_classes!r}. "
            f"Using default ({DEFAULT_N_CLASSES})."
        )
        dataset["n_classes"] = DEFAULT_N_CLASSES
    if dataset:
        config["dataset"] = dataset

    return warnings


def load_config(path: Path | None = None) -> dict:
    """Load configuration from YAML, then apply environment overrides.

    ``.env`` is read first; ``RSD_RUN_DIR`` and ``RSD_LOG_LEVEL`` override
    ``run_dir`` and ``log_level``.

    Args:
        path: Explicit config file. Defaults to ``config/config.yaml`` when present.

    Returns:
        Configuration dictionary (suitable for ``ExperimentConfig.from_dict()``).

    Raises:
        FileNotFoundError: If an explicit ``path`` does not exist.
    """
    config: dict = {}
    if path is not None and not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    config_path = path or Path(__file__).parent.parent / "config" / DEFAULT_CONFIG_FILENAME
    if config_path.exists():
        with open(config_path, encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}

    load_dotenv()
    if os.environ.get(ENV_RUN_DIR):
        config["run_dir"] = os.environ[ENV_RUN_DIR]
    if os.environ.get(ENV_LOG_LEVEL):
        config["log_level"] = os.environ[ENV_LOG_LEVEL]
    return config


# ------------------------------------------------------------------
# argument parsing
# ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file")
    common.add_argument("--seed", type=int, default=0, help="Offset added to every seed")
    common.add_argument("--out", type=Path, help="Run directory (overrides run_dir)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(
        prog="replica-signature-detector",
        description=f"{APP_NAME} v{APP_VERSION}: adversarial input detection experiments.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", parents=[common], help="Render the synthetic splits")
    gen.add_argument("--classes", type=int, help="Number of glyph classes")
    gen.add_argument("--per-class", type=int, help="Training samples per class")
    gen.add_argument("--image-size", type=int, help="Image side length")

    tr = commands.add_parser("train", parents=[common], help="Train the victim or substitute")
    tr.add_argument("--model", choices=["victim", "substitute"], default="victim")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--learning-rate", type=float)

    adv = commands.add_parser("adv-train", parents=[common], help="FGSM fine-tune the victim")
    adv.add_argument("--epochs", type=int)
    adv.add_argument("--epsilon", type=float)

    st = commands.add_parser("stats", parents=[common], help="Build per-class statistics")
    st.add_argument("--model", choices=["victim", "substitute", "victim_adv"], default="victim")
    st.add_argument("--distortions", help="Comma-separated descriptors, e.g. median:3,bitdepth:5")

    at = commands.add_parser("attack", parents=[common], help="Craft an attack set")
    at.add_argument("--model", choices=["victim", "victim_adv"], default="victim")
    at.add_argument("--attack", required=True, help="Attack name from the configured roster")
    at.add_argument("--mode", choices=["white", "black"], default="white")
    at.add_argument("--limit", type=int, help="Maximum samples to attack")

    de = commands.add_parser("detect", parents=[common], help="Score the images of a container")
    de.add_argument("--model", choices=["victim", "substitute", "victim_adv"], default="victim")
    de.add_argument("--input", type=Path, required=True, help="Dataset or attack-set container")
    de.add_argument("--threshold", type=float, help="Decision threshold (default: calibrated)")
    de.add_argument("--detector", choices=["ours", "fs"], default="ours")

    ev = commands.add_parser("eval", parents=[common], help="White-box AUC evaluation")
    ev.add_argument("--model", choices=["victim", "victim_adv"], default="victim")
    ev.add_argument("--attacks", help="Comma-separated attack names (default: all)")

    commands.add_parser("report", parents=[common], help="Every table, averaged over repeats")
    return parser


class _ProgressBars:
    """One tqdm bar per stage, closed when the stage completes."""

    def __init__(self) -> None:
        self._bars: dict[str, tqdm] = {}

    def __call__(self, stage: str, completed: int, total: int) -> None:
        bar = self._bars.get(stage)
        if bar is None:
            bar = self._bars[stage] = tqdm(total=total, desc=stage, leave=False, file=sys.stderr)
        bar.update(completed - bar.n)
        if completed >= total:
            bar.close()
            del self._bars[stage]


# ------------------------------------------------------------------
# subcommands
# ------------------------------------------------------------------


def _resolve_config(args: argparse.Namespace) -> Any:
    from src.models.config import ExperimentConfig

    raw = load_config(args.config)
    warnings = validate_config(raw)
    config = ExperimentConfig.from_dict(raw)
    if args.out is not None:
        config = replace(config, run_dir=str(args.out))
    if args.log_level:
        config = replace(config, log_level=args.log_level)
    if args.seed:
        config = config.with_seed_offset(args.seed)
    if getattr(args, "command", None) == "gen-data":
        dataset = config.dataset
        dataset = replace(
            dataset,
            n_classes=args.classes or dataset.n_classes,
            train_per_class=args.per_class or dataset.train_per_class,
            image_size=args.image_size or dataset.image_size,
        )
        config = replace(config, dataset=dataset)
    return config, warnings


def _run_detect(runner: Any, args: argparse.Namespace) -> dict[str, Any]:
    from src.core.detector import FeatureSqueezingDetector, SignatureDetector, calibrate_threshold
    from src.core.evaluation import correct_indices
    from src.models.dataset import Split
    from src.storage.artifacts import KIND_ATTACK_SET, KIND_DATASET
    from src.storage.container import ContainerFormatError, TensorContainer

    container = TensorContainer.load(args.input)
    if container.kind == KIND_DATASET:
        images = np.stack([record.array for record in container.records])
    elif container.kind == KIND_ATTACK_SET:
        images = np.stack([record.array[0] for record in container.records])
    else:
        raise ContainerFormatError(f"Cannot detect on a {container.kind!r} container", 0)

    network = runner.network(args.model)
    distortions = runner.default_distortions
    detector: Any
    if args.detector == "ours":
        detector = SignatureDetector(network, runner.statistics(args.model, distortions), distortions)
    else:
        detector = FeatureSqueezingDetector(network, distortions)

    threshold = args.threshold
    if threshold is None:
        test = runner.dataset(Split.TEST)
        legit = test.subset(correct_indices(network, test))
        scores, _ = detector.score_batch(legit.images)
        threshold = calibrate_threshold(scores, runner.config.detection.target_fpr)

    verdicts = detector.detect_batch(images, threshold)
    return {
        "input": args.input.name,
        "model": args.model,
        "detector": args.detector,
        "distortions": distortions.descriptor,
        "threshold": threshold,
        "flagged": sum(v.is_adversarial for v in verdicts),
        "verdicts": [
            {
                "index": i,
                "predicted_class": v.predicted_class,
                "score": v.score,
                "decision": v.decision.value,
            }
            for i, v in enumerate(verdicts)
        ],
    }


def run_command(args: argparse.Namespace) -> int:
    """Execute one parsed subcommand. Returns the process exit status."""
    from src.core.experiment import ExperimentRunner
    from src.core.report_writer import ReportWriter
    from src.models.attack_result import AttackMode
    from src.models.distortion import DistortionSet

    config, config_warnings = _resolve_config(args)
    setup_logger(log_level=config.log_level, log_file=config.log_file)
    logger = get_logger("main")
    logger.info("%s v%s: %s", APP_NAME, APP_VERSION, args.command)
    for warning in config_warnings:
        logger.warning("Config: %s", warning)

    runner = ExperimentRunner(config, progress_callback=_ProgressBars())
    command = args.command
    if command == "gen-data":
        runner.generate_datasets()
    elif command == "train":
        runner.train_model(args.model, args.epochs, args.batch_size, args.learning_rate)
    elif command == "adv-train":
        runner.adversarial_train(args.epochs, args.epsilon)
    elif command == "stats":
        distortions = DistortionSet.parse(args.distortions) if args.distortions else None
        runner.statistics(args.model, distortions)
    elif command == "attack":
        runner.build_attack(args.model, args.attack, AttackMode(args.mode), args.limit)
    elif command == "detect":
        result = _run_detect(runner, args)
        ReportWriter.write_json_report(runner.paths.detection(args.input.stem), result)
    elif command == "eval":
        attacks = args.attacks.split(",") if args.attacks else None
        runner.evaluate(args.model, attacks)
    elif command == "report":
        runner.report()
    logger.info("%s finished; outputs under %s", command, runner.paths.root)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Application entry point. Parses flags, loads config and runs a subcommand.

    Returns:
        0 on success, 1 on a handled failure. Usage errors exit with 2.
    """
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except (ValueError, RuntimeError, KeyError, OSError) as e:
        setup_logger()
        get_logger("main").error("%s failed: %s", args.command, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
