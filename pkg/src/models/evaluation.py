"""Scored sample sets and ROC curves."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TruthTag(Enum):
    LEGITIMATE = "legitimate"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class ScoredRecord:
    """One scored sample.

    Attributes:
        sample_id: Stable identifier (e.g. ``"legit:17"`` or ``"adv:17"``).
        score: Legitimacy score; lower means more suspicious.
        truth: Whether the sample is legitimate or adversarial.
        predicted_class: Classifier argmax on the sample.
    """

    sample_id: str
    score: float
    truth: TruthTag
    predicted_class: int


@dataclass
class ScoredSet:
    """Ordered collection of scored samples."""

    records: list[ScoredRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        for record in self.records:
            if not np.isfinite(record.score):
                raise ValueError(f"Score of {record.sample_id} is not finite")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.records], dtype=np.float64)

    @property
    def is_adversarial(self) -> np.ndarray:
        return np.array([r.truth is TruthTag.ADVERSARIAL for r in self.records], dtype=bool)

    def scores_for(self, truth: TruthTag) -> np.ndarray:
        return np.array([r.score for r in self.records if r.truth is truth], dtype=np.float64)

    @classmethod
    def from_scores(
        cls,
        legitimate: np.ndarray,
        adversarial: np.ndarray,
        legitimate_predictions: np.ndarray | None = None,
        adversarial_predictions: np.ndarray | None = None,
    ) -> ScoredSet:
        """Build a set from two score arrays; ids are ``legit:i`` / ``adv:i``."""
        legit_pred = (
            np.full(len(legitimate), -1) if legitimate_predictions is None else legitimate_predictions
        )
        adv_pred = (
            np.full(len(adversarial), -1) if adversarial_predictions is None else adversarial_predictions
        )
        records = [
            ScoredRecord(f"legit:{i}", float(s), TruthTag.LEGITIMATE, int(p))
            for i, (s, p) in enumerate(zip(legitimate, legit_pred))
        ]
        records += [
            ScoredRecord(f"adv:{i}", float(s), TruthTag.ADVERSARIAL, int(p))
            for i, (s, p) in enumerate(zip(adversarial, adv_pred))
        ]
        return cls(records)


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC with adversarial as the positive class.

    A sample is flagged at threshold ``t`` when its legitimacy score is ``<= t``.
    The first point is ``(0, 0)`` at ``t = -inf``; the last is ``(1, 1)``.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self) -> None:
        if not (self.fpr.shape == self.tpr.shape == self.thresholds.shape):
            raise ValueError("fpr, tpr and thresholds must have equal lengths")
        if np.any(np.diff(self.fpr) < 0) or np.any(np.diff(self.tpr) < 0):
            raise ValueError("ROC points must be monotone non-decreasing")

    def points(self) -> list[tuple[float, float]]:
        return [(float(f), float(t)) for f, t in zip(self.fpr, self.tpr)]


@dataclass(frozen=True)
class DetectionRates:
    """Rates at one threshold.

    Attributes:
        legitimate_pass_rate: Fraction of legitimate samples scored ``>= threshold``.
        adversarial_detection_rate: Fraction of adversarial samples scored ``< threshold``.
    """

    legitimate_pass_rate: float
    adversarial_detection_rate: float
