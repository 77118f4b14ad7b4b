"""Signatures, per-class statistics, and detection verdicts."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.models.distortion import DistortionSet
from src.utils.constants import SIMPLEX_TOLERANCE


class Decision(Enum):
    LEGITIMATE = "legitimate"
    ADVERSARIAL = "adversarial"


class ScoreOrientation(Enum):
    """How a score relates to suspicion.

    LEGITIMACY scores reject below the threshold; SUSPICION scores reject above it.
    """

    LEGITIMACY = "legitimacy"
    SUSPICION = "suspicion"


def _check_simplex_blocks(values: np.ndarray, n_classes: int, what: str) -> None:
    blocks = values.reshape(-1, n_classes)
    if np.any(blocks < 0):
        raise ValueError(f"{what} has negative entries")
    sums = blocks.sum(axis=-1, dtype=np.float64)
    if np.any(np.abs(sums - 1.0) > SIMPLEX_TOLERANCE):
        raise ValueError(f"{what} blocks must each sum to 1, got sums {sums}")


@dataclass(frozen=True)
class Signature:
    """Concatenated prediction vectors on the m distorted replicas.

    Attributes:
        values: Length ``m * n`` vector, blocks ordered as the distortion set.
        n_classes: Block length ``n``.
    """

    values: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        if self.values.ndim != 1 or self.values.size % self.n_classes:
            raise ValueError(
                f"Signature length {self.values.shape} is not a multiple of {self.n_classes}"
            )
        _check_simplex_blocks(self.values, self.n_classes, "Signature")

    @property
    def m(self) -> int:
        return self.values.size // self.n_classes

    def blocks(self) -> np.ndarray:
        """``(m, n)`` view of the per-replica prediction vectors."""
        return self.values.reshape(self.m, self.n_classes)


@dataclass(frozen=True)
class ClassStatistics:
    """Mean training signature per class.

    Attributes:
        mu: ``(n, m * n)`` float32 matrix; row ``j`` is the class-``j`` statistic.
        counts: Training samples averaged into each row.
        distortions: The distortion set the signatures were built with.
        model_fingerprint: Fingerprint of the checkpoint the statistics belong to.
        exclude_misclassified: Whether misclassified training samples were left out.
    """

    mu: np.ndarray
    counts: tuple[int, ...]
    distortions: DistortionSet
    model_fingerprint: str
    exclude_misclassified: bool = False

    def __post_init__(self) -> None:
        n_classes = len(self.counts)
        if self.mu.shape != (n_classes, len(self.distortions) * n_classes):
            raise ValueError(
                f"mu shape {self.mu.shape} does not match {n_classes} classes "
                f"and {len(self.distortions)} distortions"
            )
        if min(self.counts) < 1:
            raise ValueError(f"Every class needs at least one sample, counts={self.counts}")
        _check_simplex_blocks(self.mu, n_classes, "Class statistic")

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    def reference(self, class_index: int) -> np.ndarray:
        """The statistic vector ``mu_j``."""
        return self.mu[class_index]


@dataclass(frozen=True)
class DetectionVerdict:
    """Thresholded detector output for one input.

    Attributes:
        predicted_class: Argmax of the classifier on the undistorted input.
        score: Legitimacy score in ``[0, 1]``.
        threshold: Threshold applied.
        decision: ``LEGITIMATE`` iff ``score >= threshold``.
    """

    predicted_class: int
    score: float
    threshold: float
    decision: Decision

    @property
    def is_adversarial(self) -> bool:
        return self.decision is Decision.ADVERSARIAL
