"""Evaluation protocol: pairing, ROC/AUC, fixed-threshold rates, histograms."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.metrics import auc as _trapezoid_auc
from sklearn.metrics import roc_curve as _sk_roc_curve

from src.core.network import Network
from src.core.report_writer import ReportWriter
from src.models.attack_result import AttackSet
from src.models.dataset import LabeledDataset
from src.models.evaluation import DetectionRates, RocCurve, ScoredSet, TruthTag
from src.utils.logger import get_logger

logger = get_logger("core.evaluation")


class InsufficientSamplesError(ValueError):
    """Not enough correctly predicted legitimate samples to pair with."""

    def __init__(self, needed: int, available: int) -> None:
        super().__init__(
            f"Pairing needs {needed} correctly predicted test samples, only {available} available"
        )
        self.needed = needed
        self.available = available


@dataclass(frozen=True)
class HistogramRow:
    bin_low: float
    bin_high: float
    legitimate: int
    adversarial: int


def correct_indices(network: Network, dataset: LabeledDataset) -> np.ndarray:
    """Rows of ``dataset`` the network classifies correctly, ascending."""
    return np.flatnonzero(network.classify_batch(dataset.images) == dataset.labels)


def pair_sets(
    attack_set: AttackSet,
    testset: LabeledDataset,
    network: Network,
    seed: int,
) -> tuple[LabeledDataset, np.ndarray]:
    """Draw as many correctly predicted test samples as there are adversarial ones.

    Legitimate rows are a seeded uniform sample without replacement, kept in
    ascending row order.

    Returns:
        The legitimate subset and the ``(k, H, W, C)`` adversarial images.

    Raises:
        ValueError: If the attack set is empty.
        InsufficientSamplesError: If fewer than ``k`` test samples are predicted correctly.
    """
    size = len(attack_set)
    if size == 0:
        raise ValueError("Cannot pair an empty attack set")
    candidates = correct_indices(network, testset)
    if candidates.size < size:
        raise InsufficientSamplesError(size, int(candidates.size))
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(candidates, size=size, replace=False))
    return testset.subset(chosen), attack_set.images


def roc_curve(scored: ScoredSet) -> RocCurve:
    """Empirical ROC with adversarial as positive; flagged when ``score <= threshold``.

    One point per distinct score plus the ``(0, 0)`` start at ``-inf``.

    Raises:
        ValueError: If only one truth tag is present.
    """
    positives = scored.is_adversarial
    if positives.all() or not positives.any():
        raise ValueError("ROC needs both legitimate and adversarial samples")
    fpr, tpr, thresholds = _sk_roc_curve(positives, -scored.scores, drop_intermediate=False)
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=-thresholds)


def auc(roc: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    return float(_trapezoid_auc(roc.fpr, roc.tpr))


def detection_rate(scored: ScoredSet, threshold: float) -> DetectionRates:
    """Legitimate pass rate (``score >= threshold``) and adversarial detection rate
    (``score < threshold``). An absent group reports 0.0.
    """
    legit = scored.scores_for(TruthTag.LEGITIMATE)
    adv = scored.scores_for(TruthTag.ADVERSARIAL)
    return DetectionRates(
        legitimate_pass_rate=float(np.mean(legit >= threshold)) if legit.size else 0.0,
        adversarial_detection_rate=float(np.mean(adv < threshold)) if adv.size else 0.0,
    )


def histogram(scored: ScoredSet, bins: int) -> list[HistogramRow]:
    """Per-bin counts split by truth tag over ``[0, 1]``; the top bin is closed."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    legit, _ = np.histogram(scored.scores_for(TruthTag.LEGITIMATE), bins=edges)
    adv, _ = np.histogram(scored.scores_for(TruthTag.ADVERSARIAL), bins=edges)
    return [
        HistogramRow(float(edges[i]), float(edges[i + 1]), int(legit[i]), int(adv[i]))
        for i in range(bins)
    ]


def export_histogram(scored: ScoredSet, bins: int, path: Path) -> list[HistogramRow]:
    """Write the score histogram of ``scored`` as CSV and return its rows."""
    rows = histogram(scored, bins)
    ReportWriter.write_histogram_csv(path, rows)
    return rows


def export_roc(scored: ScoredSet, path: Path) -> RocCurve:
    """Write the ROC points of ``scored`` as CSV and return the curve."""
    roc = roc_curve(scored)
    ReportWriter.write_roc_csv(path, roc)
    return roc
