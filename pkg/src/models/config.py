"""Typed configuration model for Replica Signature Detector experiments.

Every value has an explicit type and default; seeds default to fixed
integers so a run is reproducible from its config alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from src.models.attack_result import AttackConfig, AttackKind
from src.utils.constants import (
    DEFAULT_ADV_EPOCHS,
    DEFAULT_ADV_EPSILON,
    DEFAULT_ADV_LEARNING_RATE,
    DEFAULT_ADV_TRAIN_SEED,
    DEFAULT_ATTACK_SEED,
    DEFAULT_BATCH_SIZE,
    DEFAULT_DATA_SEED,
    DEFAULT_DEEPFOOL_MAX_ITERATIONS,
    DEFAULT_DISTORTIONS,
    DEFAULT_EPOCHS,
    DEFAULT_HISTOGRAM_BINS,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_ATTACK_SAMPLES,
    DEFAULT_MAX_ATTACK_WORKERS,
    DEFAULT_N_CLASSES,
    DEFAULT_PAIRING_SEED,
    DEFAULT_REPEATS,
    DEFAULT_RUN_DIR,
    DEFAULT_SUBSTITUTE_SEED,
    DEFAULT_TARGET_FPR,
    DEFAULT_TEST_PER_CLASS,
    DEFAULT_TRAIN_PER_CLASS,
    DEFAULT_TRAIN_SEED,
    DEFAULT_VICTIM_SEED,
)


def _filtered(cls: type, data: dict[str, Any] | None) -> dict[str, Any]:
    """Keep only keys that are fields of ``cls`` and not None."""
    known = {f.name for f in fields(cls)}
    return {k: v for k, v in (data or {}).items() if k in known and v is not None}


@dataclass
class DatasetConfig:
    """Synthetic benchmark shape.

    Attributes:
        n_classes: Number of glyph classes.
        train_per_class: Training samples per class.
        test_per_class: Test samples per class.
        image_size: Side length of the square RGB images.
    """

    n_classes: int = DEFAULT_N_CLASSES
    train_per_class: int = DEFAULT_TRAIN_PER_CLASS
    test_per_class: int = DEFAULT_TEST_PER_CLASS
    image_size: int = DEFAULT_IMAGE_SIZE


@dataclass
class TrainingConfig:
    """Victim/substitute training and adversarial fine-tuning hyperparameters."""

    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    adv_epochs: int = DEFAULT_ADV_EPOCHS
    adv_epsilon: float = DEFAULT_ADV_EPSILON
    adv_learning_rate: float = DEFAULT_ADV_LEARNING_RATE


@dataclass
class DetectionConfig:
    """Detector and evaluation settings.

    Attributes:
        distortions: Descriptors of the detector's distortion set, in order.
        target_fpr: Legitimate rejection rate the black-box threshold is calibrated to.
        histogram_bins: Bins of the exported score histograms.
        exclude_misclassified: Leave misclassified training samples out of the
            class statistics.
        ablation_attacks: Attack names the distortion ablation runs on.
    """

    distortions: list[str] = field(default_factory=lambda: list(DEFAULT_DISTORTIONS))
    target_fpr: float = DEFAULT_TARGET_FPR
    histogram_bins: int = DEFAULT_HISTOGRAM_BINS
    exclude_misclassified: bool = False
    ablation_attacks: list[str] = field(default_factory=lambda: ["cw", "df", "fgsm4"])


@dataclass
class SeedConfig:
    """Every seed the pipeline consumes."""

    data: int = DEFAULT_DATA_SEED
    victim: int = DEFAULT_VICTIM_SEED
    substitute: int = DEFAULT_SUBSTITUTE_SEED
    train: int = DEFAULT_TRAIN_SEED
    adv_train: int = DEFAULT_ADV_TRAIN_SEED
    attack: int = DEFAULT_ATTACK_SEED
    pairing: int = DEFAULT_PAIRING_SEED

    def offset(self, delta: int) -> SeedConfig:
        """All seeds shifted by ``delta`` (used for repeats and ``--seed``)."""
        return SeedConfig(**{name: value + delta for name, value in asdict(self).items()})


def default_attacks() -> list[AttackConfig]:
    """The roster reported in every table: C&W at three confidences, DeepFool, two FGSM steps."""
    return [
        AttackConfig(name="cw", kind=AttackKind.CW, kappa=0.0),
        AttackConfig(name="cw5", kind=AttackKind.CW, kappa=0.5),
        AttackConfig(name="cw9", kind=AttackKind.CW, kappa=0.9),
        AttackConfig(name="df", kind=AttackKind.DEEPFOOL, max_iterations=DEFAULT_DEEPFOOL_MAX_ITERATIONS),
        AttackConfig(name="fgsm1", kind=AttackKind.FGSM, epsilon=0.02),
        AttackConfig(name="fgsm4", kind=AttackKind.FGSM, epsilon=DEFAULT_ADV_EPSILON),
    ]


@dataclass
class ExperimentConfig:
    """Strongly-typed configuration for a full experiment run.

    Attributes:
        run_dir: Directory every artifact of the run is written to.
        dataset: Synthetic benchmark settings.
        training: Training hyperparameters.
        detection: Detector and evaluation settings.
        seeds: Every seed used by the run.
        attacks: Attack roster, addressed by name.
        black_box_attacks: Names crafted on the substitute and transferred.
        adv_training_attacks: Names re-crafted against the fine-tuned victim.
        max_attack_samples: Cap on samples attacked per attack set.
        max_workers: Threads used for attack generation.
        repeats: Number of seed-offset repeats the report averages over.
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR).
        log_file: Path to a log file (None = console only).
    """

    run_dir: str = DEFAULT_RUN_DIR
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    attacks: list[AttackConfig] = field(default_factory=default_attacks)
    black_box_attacks: list[str] = field(default_factory=lambda: ["cw", "df", "fgsm4"])
    adv_training_attacks: list[str] = field(default_factory=lambda: ["cw", "df", "fgsm1", "fgsm4"])
    max_attack_samples: int = DEFAULT_MAX_ATTACK_SAMPLES
    max_workers: int = DEFAULT_MAX_ATTACK_WORKERS
    repeats: int = DEFAULT_REPEATS
    log_level: str = "INFO"
    log_file: str | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Create a config from a raw dictionary (e.g., from YAML).

        Unknown keys are ignored so files with extra keys don't break older code.
        """
        top = _filtered(cls, data)
        if "dataset" in top:
            top["dataset"] = DatasetConfig(**_filtered(DatasetConfig, top["dataset"]))
        if "training" in top:
            top["training"] = TrainingConfig(**_filtered(TrainingConfig, top["training"]))
        if "detection" in top:
            top["detection"] = DetectionConfig(**_filtered(DetectionConfig, top["detection"]))
        if "seeds" in top:
            top["seeds"] = SeedConfig(**_filtered(SeedConfig, top["seeds"]))
        if "attacks" in top:
            top["attacks"] = [AttackConfig.from_dict(a) for a in top["attacks"]]
        return cls(**top)

    def to_dict(self) -> dict[str, Any]:
        """Serialize the fully resolved config to plain JSON/YAML types."""
        data = asdict(self)
        data["attacks"] = [attack.to_dict() for attack in self.attacks]
        return data

    def attack(self, name: str) -> AttackConfig:
        """Look up an attack of the roster by name.

        Raises:
            KeyError: If no attack has that name.
        """
        for attack in self.attacks:
            if attack.name == name:
                return attack
        known = ", ".join(a.name for a in self.attacks)
        raise KeyError(f"Unknown attack {name!r} (configured: {known})")

    def with_seed_offset(self, delta: int) -> ExperimentConfig:
        return replace(self, seeds=self.seeds.offset(delta))

    @property
    def run_path(self) -> Path:
        return Path(self.run_dir).expanduser()
