"""Replica-signature detector and the feature-squeezing baseline.

A signature concatenates the prediction vectors of the distorted replicas of
an input. Each class keeps the mean training signature; an input is scored
by the cosine between its signature and the statistic of its predicted
class, and rejected when the score falls below a threshold.
"""

from __future__ import annotations

import numpy as np

from src.core.distortions import apply_set
from src.core.network import Network
from src.models.dataset import LabeledDataset, Split
from src.models.detection import (
    ClassStatistics,
    Decision,
    DetectionVerdict,
    ScoreOrientation,
    Signature,
)
from src.models.distortion import DistortionSet
from src.utils.constants import FS_SCORE_MAX
from src.utils.logger import get_logger

logger = get_logger("core.detector")


class StaleStatisticsError(ValueError):
    """Statistics were built for another model or another distortion set."""


# ------------------------------------------------------------------
# signatures and statistics
# ------------------------------------------------------------------


def build_signatures(
    network: Network, images: np.ndarray, distortions: DistortionSet
) -> np.ndarray:
    """``(N, m * n)`` float64 signatures; the undistorted input is not queried."""
    replicas = apply_set(images, distortions)
    return np.concatenate([network.predict_batch(replica) for replica in replicas], axis=1)


def build_signature(network: Network, image: np.ndarray, distortions: DistortionSet) -> Signature:
    values = build_signatures(network, np.asarray(image)[None], distortions)[0]
    return Signature(values=values, n_classes=network.n_classes)


def compute_class_statistics(
    network: Network,
    trainset: LabeledDataset,
    distortions: DistortionSet,
    exclude_misclassified: bool = False,
) -> ClassStatistics:
    """Mean signature per ground-truth class of the training split.

    Raises:
        ValueError: If ``trainset`` is not a train split or a class has no sample.
    """
    if trainset.split is not Split.TRAIN:
        raise ValueError(f"Class statistics need the train split, got {trainset.split.value}")
    signatures = build_signatures(network, trainset.images, distortions)
    keep = np.ones(len(trainset), dtype=bool)
    if exclude_misclassified:
        keep = network.classify_batch(trainset.images) == trainset.labels
        logger.info("Excluding %d misclassified training samples", int((~keep).sum()))

    rows, counts = [], []
    for class_index in range(trainset.n_classes):
        members = (trainset.labels == class_index) & keep
        if not members.any():
            raise ValueError(f"Class {class_index} has no training sample to average")
        rows.append(signatures[members].mean(axis=0))
        counts.append(int(members.sum()))

    stats = ClassStatistics(
        mu=np.stack(rows).astype(np.float32),
        counts=tuple(counts),
        distortions=distortions,
        model_fingerprint=network.fingerprint(),
        exclude_misclassified=exclude_misclassified,
    )
    logger.info(
        "Class statistics built over %d samples with distortions %s",
        sum(counts),
        distortions.descriptor,
    )
    return stats


# ------------------------------------------------------------------
# scores
# ------------------------------------------------------------------


def projection_scores(signatures: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity, clipped into ``[0, 1]``."""
    a = np.atleast_2d(np.asarray(signatures, dtype=np.float64))
    b = np.atleast_2d(np.asarray(references, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"Signature shape {a.shape} does not match reference shape {b.shape}")
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    if np.any(norms == 0):
        raise ValueError("Cannot score a zero-norm signature or statistic")
    return np.clip((a * b).sum(axis=1) / norms, 0.0, 1.0)


def projection_score(signature: np.ndarray | Signature, reference: np.ndarray) -> float:
    """``<gamma, mu> / (||gamma|| ||mu||)`` for one pair."""
    values = signature.values if isinstance(signature, Signature) else signature
    return float(projection_scores(values, reference)[0])


def fs_scores(network: Network, images: np.ndarray, distortions: DistortionSet) -> np.ndarray:
    """Feature-squeezing score per image: the largest L1 gap between ``f(x)``
    and ``f(psi_i(x))``. Higher means more suspicious; range ``[0, 2]``.
    """
    clean = network.predict_batch(images)
    gaps = [
        np.abs(clean - network.predict_batch(replica)).sum(axis=1)
        for replica in apply_set(images, distortions)
    ]
    return np.clip(np.max(gaps, axis=0), 0.0, FS_SCORE_MAX)


def fs_score(network: Network, image: np.ndarray, distortions: DistortionSet) -> float:
    return float(fs_scores(network, np.asarray(image)[None], distortions)[0])


def fs_legitimacy(scores: np.ndarray) -> np.ndarray:
    """Map FS scores onto the shared legitimacy orientation: ``(2 - fs) / 2``."""
    return (FS_SCORE_MAX - np.asarray(scores, dtype=np.float64)) / FS_SCORE_MAX


def calibrate_threshold(
    scores: np.ndarray,
    target_fpr: float,
    orientation: ScoreOrientation = ScoreOrientation.LEGITIMACY,
) -> float:
    """Threshold rejecting at most ``floor(target_fpr * N)`` of ``scores``.

    For legitimacy scores a sample is rejected when ``score < threshold`` and
    the largest such threshold is returned; for suspicion scores rejection is
    ``score > threshold`` and the smallest such threshold is returned.

    Raises:
        ValueError: If ``scores`` is empty or ``target_fpr`` is outside ``(0, 1)``.
    """
    values = np.sort(np.asarray(scores, dtype=np.float64))
    if values.size == 0:
        raise ValueError("Cannot calibrate a threshold on an empty score list")
    if not 0.0 < target_fpr < 1.0:
        raise ValueError(f"target_fpr must lie in (0, 1), got {target_fpr}")
    allowed = int(np.floor(target_fpr * values.size))
    if orientation is ScoreOrientation.LEGITIMACY:
        return float(values[allowed])
    return float(values[::-1][allowed])


# ------------------------------------------------------------------
# detectors
# ------------------------------------------------------------------


class SignatureDetector:
    """Projection-score detector bound to one model and its class statistics.

    Scores are legitimacy scores: near 1 for inputs that behave like the
    training data of their predicted class under distortion.
    """

    orientation = ScoreOrientation.LEGITIMACY

    def __init__(
        self,
        network: Network,
        stats: ClassStatistics,
        distortions: DistortionSet | None = None,
    ) -> None:
        """Bind statistics to a model.

        Raises:
            StaleStatisticsError: If the statistics belong to another model or
                were built with a different distortion set.
        """
        fingerprint = network.fingerprint()
        if stats.model_fingerprint != fingerprint:
            raise StaleStatisticsError(
                f"Statistics fingerprint {stats.model_fingerprint[:12]} does not match "
                f"model {fingerprint[:12]}"
            )
        if distortions is not None and distortions != stats.distortions:
            raise StaleStatisticsError(
                f"Statistics use distortions {stats.distortions.descriptor}, "
                f"detector expects {distortions.descriptor}"
            )
        if stats.n_classes != network.n_classes:
            raise StaleStatisticsError(
                f"Statistics cover {stats.n_classes} classes, model has {network.n_classes}"
            )
        self._network = network
        self._stats = stats

    @property
    def distortions(self) -> DistortionSet:
        return self._stats.distortions

    def score_batch(self, images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Legitimacy scores and predicted classes for a batch."""
        predicted = self._network.classify_batch(images)
        signatures = build_signatures(self._network, images, self._stats.distortions)
        return projection_scores(signatures, self._stats.mu[predicted]), predicted

    def detect(self, image: np.ndarray, threshold: float) -> DetectionVerdict:
        scores, predicted = self.score_batch(np.asarray(image)[None])
        return _verdict(int(predicted[0]), float(scores[0]), threshold)

    def detect_batch(self, images: np.ndarray, threshold: float) -> list[DetectionVerdict]:
        scores, predicted = self.score_batch(images)
        return [_verdict(int(p), float(s), threshold) for p, s in zip(predicted, scores)]


class FeatureSqueezingDetector:
    """Feature-squeezing baseline reported on the legitimacy orientation."""

    orientation = ScoreOrientation.LEGITIMACY

    def __init__(self, network: Network, distortions: DistortionSet) -> None:
        self._network = network
        self._distortions = distortions

    @property
    def distortions(self) -> DistortionSet:
        return self._distortions

    def score_batch(self, images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        predicted = self._network.classify_batch(images)
        return fs_legitimacy(fs_scores(self._network, images, self._distortions)), predicted

    def detect(self, image: np.ndarray, threshold: float) -> DetectionVerdict:
        scores, predicted = self.score_batch(np.asarray(image)[None])
        return _verdict(int(predicted[0]), float(scores[0]), threshold)

    def detect_batch(self, images: np.ndarray, threshold: float) -> list[DetectionVerdict]:
        scores, predicted = self.score_batch(images)
        return [_verdict(int(p), float(s), threshold) for p, s in zip(predicted, scores)]


def _verdict(predicted: int, score: float, threshold: float) -> DetectionVerdict:
    decision = Decision.LEGITIMATE if score >= threshold else Decision.ADVERSARIAL
    return DetectionVerdict(
        predicted_class=predicted, score=score, threshold=threshold, decision=decision
    )


def detect(
    network: Network,
    stats: ClassStatistics,
    image: np.ndarray,
    threshold: float,
) -> DetectionVerdict:
    """Score one input against the statistic of its predicted class and threshold it.

    Raises:
        StaleStatisticsError: If ``stats`` was built for another model.
    """
    return SignatureDetector(network, stats).detect(image, threshold)
