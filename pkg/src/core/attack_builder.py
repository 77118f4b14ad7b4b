"""Assemble white-box and black-box attack sets over a test split."""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

from src.core.attacks import run_attack
from src.core.network import Network
from src.models.attack_result import (
    AttackConfig,
    AttackMode,
    AttackResult,
    AttackSet,
    AttackSetSummary,
)
from src.models.dataset import LabeledDataset, Split
from src.utils.constants import DEFAULT_MAX_ATTACK_WORKERS
from src.utils.logger import get_logger

logger = get_logger("core.attack_builder")


class EmptyAttackSetError(RuntimeError):
    """No crafted sample fooled the victim. ``summary`` still holds the attempt figures."""

    def __init__(self, config: AttackConfig, mode: AttackMode, summary: AttackSetSummary) -> None:
        super().__init__(
            f"Attack {config.name} ({mode.value}-box) fooled the victim on none of "
            f"{summary.attempted} attempted samples"
        )
        self.config = config
        self.mode = mode
        self.summary = summary


def craft_batch(
    network: Network,
    images: np.ndarray,
    labels: np.ndarray,
    source_indices: np.ndarray,
    config: AttackConfig,
    max_workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> list[AttackResult]:
    """Attack every image in parallel; results come back in input order.

    Args:
        network: Model the attack differentiates through (read-only).
        images: ``(N, H, W, C)`` sources.
        labels: Ground-truth labels of the sources.
        source_indices: Dataset row of each source, stored in each result.
        config: Attack to run.
        max_workers: Worker threads. Defaults to ``DEFAULT_MAX_ATTACK_WORKERS``.
        progress_callback: Optional ``(completed, total)`` callback invoked
            after each sample finishes.
    """
    if max_workers is None:
        max_workers = DEFAULT_MAX_ATTACK_WORKERS
    total = len(images)
    if total == 0:
        return []

    logger.info("Crafting %d %s samples with %d workers", total, config.name, max_workers)
    results: dict[int, AttackResult] = {}
    completed = 0
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        future_to_row = {
            pool.submit(
                run_attack, network, images[row], int(labels[row]), config, int(source_indices[row])
            ): row
            for row in range(total)
        }
        for future in as_completed(future_to_row):
            row = future_to_row[future]
            results[row] = future.result()
            completed += 1
            logger.debug(
                "Sample %d: success=%s iterations=%d L2=%.4f",
                results[row].source_index,
                results[row].success,
                results[row].iterations,
                results[row].l2_norm,
            )
            if progress_callback:
                progress_callback(completed, total)
    return [results[row] for row in range(total)]


def build_attack_set(
    crafting: Network,
    dataset: LabeledDataset,
    config: AttackConfig,
    victim: Network,
    mode: AttackMode,
    max_samples: int | None = None,
    max_workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> AttackSet:
    """Craft on ``crafting`` and keep only the samples that fool ``victim``.

    Sources are the test samples the crafting model classifies correctly, in
    index order, capped at ``max_samples``. A crafted sample is kept when the
    victim classified its source correctly and misclassifies ``x'``. In
    white-box mode ``crafting`` and ``victim`` are the same model.

    Raises:
        ValueError: If ``dataset`` is not a test split.
        EmptyAttackSetError: If no sample is kept.
    """
    if dataset.split is not Split.TEST:
        raise ValueError(f"Attack sets are built on the test split, got {dataset.split.value}")

    crafting_pred = crafting.classify_batch(dataset.images)
    sources = np.flatnonzero(crafting_pred == dataset.labels)
    if max_samples is not None:
        sources = sources[:max_samples]

    results = craft_batch(
        crafting,
        dataset.images[sources],
        dataset.labels[sources],
        sources,
        config,
        max_workers=max_workers,
        progress_callback=progress_callback,
    )

    labels = dataset.labels[sources]
    if results:
        crafted = np.stack([r.adversarial for r in results])
        victim_probs = victim.predict_batch(crafted)
        victim_adv_pred = victim_probs.argmax(axis=1)
        victim_clean_pred = victim.classify_batch(dataset.images[sources])
        crafting_adv_pred = np.array([r.adversarial_prediction for r in results])
        summary = AttackSetSummary(
            attempted=len(results),
            victim_accuracy=float(np.mean(victim_adv_pred == labels)),
            victim_confidence=float(np.mean(victim_probs.max(axis=1))),
            crafting_accuracy=float(np.mean(crafting_adv_pred == labels)),
            crafting_success_rate=float(np.mean([r.success for r in results])),
        )
        keep = (victim_clean_pred == labels) & (victim_adv_pred != labels)
    else:
        summary = AttackSetSummary()
        keep = np.zeros(0, dtype=bool)
        victim_adv_pred = np.zeros(0, dtype=np.int64)

    if not keep.any():
        logger.warning("Attack %s (%s-box): no sample fooled the victim", config.name, mode.value)
        raise EmptyAttackSetError(config, mode, summary)

    rows = np.flatnonzero(keep)
    attack_set = AttackSet(
        config=config,
        mode=mode,
        results=[results[row] for row in rows],
        labels=labels[rows].astype(np.int64),
        victim_predictions=victim_adv_pred[rows].astype(np.int64),
        crafting_fingerprint=crafting.fingerprint(),
        victim_fingerprint=victim.fingerprint(),
        summary=summary,
    )
    logger.info(
        "Attack %s (%s-box): kept %d of %d, victim accuracy %.4f, mean L2 %.4f",
        config.name,
        mode.value,
        len(attack_set),
        summary.attempted,
        summary.victim_accuracy,
        attack_set.mean_l2,
    )
    return attack_set
