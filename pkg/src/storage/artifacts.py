"""Typed save/load for datasets, checkpoints, class statistics and attack sets."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from src.models.attack_result import (
    AttackConfig,
    AttackMode,
    AttackResult,
    AttackSet,
    AttackSetSummary,
)
from src.models.dataset import LabeledDataset, Split
from src.models.detection import ClassStatistics
from src.models.distortion import DistortionSet
from src.models.network import Checkpoint, ModelConfig, TrainingMetadata
from src.storage.container import ContainerFormatError, ContainerRecord, TensorContainer

KIND_DATASET = "dataset"
KIND_CHECKPOINT = "checkpoint"
KIND_STATISTICS = "class-statistics"
KIND_ATTACK_SET = "attack-set"


# ------------------------------------------------------------------
# datasets
# ------------------------------------------------------------------


def dataset_container(dataset: LabeledDataset) -> TensorContainer:
    return TensorContainer(
        header={"kind": KIND_DATASET, "split": dataset.split.value, "n_classes": dataset.n_classes},
        records=[
            ContainerRecord(array=image, label=int(label))
            for image, label in zip(dataset.images, dataset.labels)
        ],
        n_classes=dataset.n_classes,
    )


def save_dataset(path: Path, dataset: LabeledDataset) -> Path:
    return dataset_container(dataset).save(path)


def load_dataset(path: Path) -> LabeledDataset:
    container = TensorContainer.load(path, KIND_DATASET)
    if not container.records:
        raise ContainerFormatError(f"{path.name} holds no images", 0)
    return LabeledDataset(
        images=np.stack([record.array for record in container.records]),
        labels=np.array([record.label for record in container.records], dtype=np.int64),
        split=Split(container.header["split"]),
        n_classes=container.n_classes,
    )


# ------------------------------------------------------------------
# checkpoints
# ------------------------------------------------------------------


def checkpoint_container(checkpoint: Checkpoint) -> TensorContainer:
    return TensorContainer(
        header={
            "kind": KIND_CHECKPOINT,
            "config": checkpoint.config.to_dict(),
            "metadata": checkpoint.metadata.to_dict(),
        },
        records=[
            ContainerRecord(array=values, metadata={"name": name})
            for name, values in checkpoint.params.items()
        ],
    )


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    """Parameters are stored as float32."""
    return checkpoint_container(checkpoint).save(path)


def load_checkpoint(path: Path) -> Checkpoint:
    container = TensorContainer.load(path, KIND_CHECKPOINT)
    params = {str((r.metadata or {})["name"]): r.array for r in container.records}
    try:
        return Checkpoint(
            config=ModelConfig.from_dict(container.header["config"]),
            params=params,
            metadata=TrainingMetadata.from_dict(container.header.get("metadata", {})),
        )
    except (KeyError, ValueError) as exc:
        raise ContainerFormatError(f"{path.name} is not a valid checkpoint: {exc}", 0) from exc


# ------------------------------------------------------------------
# class statistics
# ------------------------------------------------------------------


def statistics_container(stats: ClassStatistics) -> TensorContainer:
    return TensorContainer(
        header={
            "kind": KIND_STATISTICS,
            "n_classes": stats.n_classes,
            "m": len(stats.distortions),
            "distortions": [spec.descriptor for spec in stats.distortions],
            "counts": list(stats.counts),
            "model_fingerprint": stats.model_fingerprint,
            "exclude_misclassified": stats.exclude_misclassified,
        },
        records=[ContainerRecord(array=stats.mu)],
    )


def save_statistics(path: Path, stats: ClassStatistics) -> Path:
    return statistics_container(stats).save(path)


def load_statistics(path: Path) -> ClassStatistics:
    container = TensorContainer.load(path, KIND_STATISTICS)
    header = container.header
    if len(container.records) != 1:
        raise ContainerFormatError(
            f"{path.name}: expected one statistics record, found {len(container.records)}", 0
        )
    distortions = DistortionSet.parse(header["distortions"])
    if len(distortions) != header["m"]:
        raise ContainerFormatError(f"{path.name}: m={header['m']} but {len(distortions)} distortions", 0)
    return ClassStatistics(
        mu=container.records[0].array,
        counts=tuple(int(c) for c in header["counts"]),
        distortions=distortions,
        model_fingerprint=str(header["model_fingerprint"]),
        exclude_misclassified=bool(header.get("exclude_misclassified", False)),
    )


# ------------------------------------------------------------------
# attack sets
# ------------------------------------------------------------------


def attack_set_container(attack_set: AttackSet, n_classes: int) -> TensorContainer:
    records = []
    for result, label, victim_pred in zip(
        attack_set.results, attack_set.labels, attack_set.victim_predictions
    ):
        records.append(
            ContainerRecord(
                array=np.stack([result.adversarial, result.perturbation]),
                label=int(label),
                metadata={
                    "source_index": result.source_index,
                    "success": result.success,
                    "iterations": result.iterations,
                    "l2_norm": result.l2_norm,
                    "original_prediction": result.original_prediction,
                    "adversarial_prediction": result.adversarial_prediction,
                    "victim_prediction": int(victim_pred),
                },
            )
        )
    return TensorContainer(
        header={
            "kind": KIND_ATTACK_SET,
            "attack": attack_set.config.to_dict(),
            "mode": attack_set.mode.value,
            "crafting_fingerprint": attack_set.crafting_fingerprint,
            "victim_fingerprint": attack_set.victim_fingerprint,
            "summary": attack_set.summary.to_dict(),
        },
        records=records,
        n_classes=n_classes,
    )


def save_attack_set(path: Path, attack_set: AttackSet, n_classes: int) -> Path:
    return attack_set_container(attack_set, n_classes).save(path)


def load_attack_set(path: Path) -> AttackSet:
    container = TensorContainer.load(path, KIND_ATTACK_SET)
    header = container.header
    results = []
    victim_predictions = []
    for record in container.records:
        meta = record.metadata or {}
        results.append(
            AttackResult(
                adversarial=record.array[0],
                perturbation=record.array[1],
                source_index=int(meta["source_index"]),
                success=bool(meta["success"]),
                iterations=int(meta["iterations"]),
                l2_norm=float(meta["l2_norm"]),
                original_prediction=int(meta["original_prediction"]),
                adversarial_prediction=int(meta["adversarial_prediction"]),
            )
        )
        victim_predictions.append(int(meta["victim_prediction"]))
    return AttackSet(
        config=AttackConfig.from_dict(header["attack"]),
        mode=AttackMode(header["mode"]),
        results=results,
        labels=np.array([r.label for r in container.records], dtype=np.int64),
        victim_predictions=np.array(victim_predictions, dtype=np.int64),
        crafting_fingerprint=str(header["crafting_fingerprint"]),
        victim_fingerprint=str(header["victim_fingerprint"]),
        summary=AttackSetSummary(**header["summary"]),
    )
