"""Attack configuration, per-sample attack results, and attack sets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from src.utils.constants import (
    DEFAULT_CW_BINARY_SEARCH_STEPS,
    DEFAULT_CW_INITIAL_CONST,
    DEFAULT_CW_LEARNING_RATE,
    DEFAULT_CW_LOGIT_SCALE,
    DEFAULT_CW_MAX_ITERATIONS,
    DEFAULT_DEEPFOOL_MAX_ITERATIONS,
    DEFAULT_DEEPFOOL_OVERSHOOT,
    DEFAULT_FGSM_EPSILON,
)


class AttackKind(Enum):
    FGSM = "fgsm"
    DEEPFOOL = "deepfool"
    CW = "cw"


class AttackMode(Enum):
    """White-box: crafted on the victim. Black-box: crafted on a substitute."""

    WHITE_BOX = "white"
    BLACK_BOX = "black"


@dataclass(frozen=True)
class AttackConfig:
    """Parameters of one named attack.

    Attributes:
        name: Roster name used in artifact names and reports (e.g. ``"cw5"``).
        kind: Attack algorithm.
        epsilon: FGSM step size.
        kappa: C&W confidence in ``[0, 1]``; applied as ``kappa * logit_scale``.
        max_iterations: DeepFool iterations, or C&W gradient steps per constant.
        overshoot: DeepFool overshoot factor.
        learning_rate: C&W Adam learning rate.
        binary_search_steps: C&W binary-search steps over the trade-off constant.
        initial_const: C&W starting trade-off constant.
        logit_scale: Logit units per unit of ``kappa``.
        abort_early: Stop a C&W constant once its loss stalls.
    """

    name: str
    kind: AttackKind
    epsilon: float = DEFAULT_FGSM_EPSILON
    kappa: float = 0.0
    max_iterations: int = DEFAULT_CW_MAX_ITERATIONS
    overshoot: float = DEFAULT_DEEPFOOL_OVERSHOOT
    learning_rate: float = DEFAULT_CW_LEARNING_RATE
    binary_search_steps: int = DEFAULT_CW_BINARY_SEARCH_STEPS
    initial_const: float = DEFAULT_CW_INITIAL_CONST
    logit_scale: float = DEFAULT_CW_LOGIT_SCALE
    abort_early: bool = True

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.binary_search_steps < 1:
            raise ValueError(f"binary_search_steps must be >= 1, got {self.binary_search_steps}")

    @property
    def logit_kappa(self) -> float:
        """Confidence margin on the logit scale."""
        return self.kappa * self.logit_scale

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AttackConfig:
        known = {name for name in cls.__dataclass_fields__}
        values = {k: v for k, v in data.items() if k in known and v is not None}
        kind = AttackKind(values.pop("kind"))
        if kind is AttackKind.DEEPFOOL and "max_iterations" not in values:
            values["max_iterations"] = DEFAULT_DEEPFOOL_MAX_ITERATIONS
        return cls(kind=kind, **values)


@dataclass
class AttackResult:
    """Outcome of attacking one sample.

    Attributes:
        adversarial: ``x'``, always equal to ``clip(x + perturbation, 0, 1)``.
        perturbation: ``eta = x' - x``.
        source_index: Row of the source sample in its dataset.
        success: Whether the crafting model's argmax changed.
        iterations: Gradient steps / iterations used.
        l2_norm: ``||eta||_2``.
        original_prediction: Crafting model's argmax on ``x``.
        adversarial_prediction: Crafting model's argmax on ``x'``.
    """

    adversarial: np.ndarray
    perturbation: np.ndarray
    source_index: int
    success: bool
    iterations: int
    l2_norm: float
    original_prediction: int
    adversarial_prediction: int


@dataclass(frozen=True)
class AttackSetSummary:
    """Accuracy figures over every attacked sample, before the success filter.

    Attributes:
        attempted: Samples attacked (correctly classified by the crafting model).
        victim_accuracy: Victim accuracy on all crafted samples.
        victim_confidence: Victim's mean top-class probability on them.
        crafting_accuracy: Crafting model accuracy on them (equals the victim
            figure in white-box mode).
        crafting_success_rate: Fraction the crafting model reports as successful.
    """

    attempted: int = 0
    victim_accuracy: float = 0.0
    victim_confidence: float = 0.0
    crafting_accuracy: float = 0.0
    crafting_success_rate: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class AttackSet:
    """Successful adversarial samples with their provenance.

    Every retained result fooled the victim. Each result's ``success`` and
    ``adversarial_prediction`` describe the crafting model, which in black-box
    mode is the substitute; the victim's verdict is ``victim_predictions``.

    Attributes:
        config: Attack that produced the set.
        mode: White-box or black-box.
        results: Retained results, in source-index order.
        labels: Ground-truth labels of the sources.
        victim_predictions: Victim argmax on each retained ``x'``.
        crafting_fingerprint: Fingerprint of the model the attack ran against.
        victim_fingerprint: Fingerprint of the model success was judged on.
        summary: Figures over all attempted samples.
    """

    config: AttackConfig
    mode: AttackMode
    results: list[AttackResult] = field(default_factory=list)
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    victim_predictions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    crafting_fingerprint: str = ""
    victim_fingerprint: str = ""
    summary: AttackSetSummary = field(default_factory=AttackSetSummary)

    def __len__(self) -> int:
        return len(self.results)

    @property
    def images(self) -> np.ndarray:
        """Stacked adversarial images, ``(k, H, W, C)``."""
        if not self.results:
            return np.zeros((0, 0, 0, 0), dtype=np.float32)
        return np.stack([r.adversarial for r in self.results])

    @property
    def source_indices(self) -> np.ndarray:
        return np.array([r.source_index for r in self.results], dtype=np.int64)

    @property
    def mean_l2(self) -> float:
        if not self.results:
            return 0.0
        return float(np.mean([r.l2_norm for r in self.results]))
