"""Mini-batch SGD training and FGSM adversarial fine-tuning."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from src.core.attacks import fgsm_batch
from src.core.network import Network
from src.core.numerics import sgd_step
from src.models.dataset import LabeledDataset, Split
from src.models.network import TrainingMetadata
from src.utils.logger import get_logger

logger = get_logger("core.trainer")

BatchTransform = Callable[[Network, np.ndarray, np.ndarray], np.ndarray]


class TrainingDivergedError(RuntimeError):
    """Raised when the loss or a gradient stops being finite."""

    def __init__(self, epoch: int, batch: int, detail: str) -> None:
        super().__init__(f"Training diverged at epoch {epoch}, batch {batch}: {detail}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class EpochSummary:
    epoch: int
    mean_loss: float
    batches: int


def accuracy(network: Network, dataset: LabeledDataset) -> float:
    """Fraction of ``dataset`` the network classifies correctly."""
    if len(dataset) == 0:
        return 0.0
    return float(np.mean(network.classify_batch(dataset.images) == dataset.labels))


def _check_hyperparameters(epochs: int, batch_size: int, learning_rate: float) -> None:
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be > 0, got {learning_rate}")


def _run_epochs(
    network: Network,
    dataset: LabeledDataset,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
    transform: BatchTransform | None = None,
    epoch_callback: Callable[[EpochSummary], None] | None = None,
) -> tuple[Network, float | None]:
    """Shared epoch loop: one seeded permutation per epoch, one SGD step per batch.

    ``transform`` may rewrite each batch's images against the current network
    before the step (labels are kept).
    """
    rng = np.random.default_rng(seed)
    final_loss: float | None = None
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for batch_index, start in enumerate(range(0, len(order), batch_size)):
            rows = order[start : start + batch_size]
            images, labels = dataset.images[rows], dataset.labels[rows]
            try:
                if transform is not None:
                    images = transform(network, images, labels)
                loss, grads = network.loss_and_gradients(images, labels)
                if not np.isfinite(loss):
                    raise FloatingPointError(f"loss is {loss}")
                network = network.with_params(sgd_step(network.params, grads, learning_rate))
            except FloatingPointError as exc:
                raise TrainingDivergedError(epoch, batch_index, str(exc)) from exc
            losses.append(loss)
            logger.debug("epoch %d batch %d loss %.5f", epoch, batch_index, loss)
        final_loss = float(np.mean(losses)) if losses else None
        summary = EpochSummary(epoch=epoch, mean_loss=final_loss or 0.0, batches=len(losses))
        logger.info("Epoch %d/%d: mean loss %.4f", epoch + 1, epochs, summary.mean_loss)
        if epoch_callback is not None:
            epoch_callback(summary)
    return network, final_loss


def _finish(
    network: Network,
    trainset: LabeledDataset,
    testset: LabeledDataset | None,
    epochs: int,
    final_loss: float | None,
    seed: int,
    adversarial_epsilon: float | None,
) -> Network:
    train_acc = accuracy(network, trainset)
    test_acc = accuracy(network, testset) if testset is not None else None
    metadata = TrainingMetadata(
        epochs=epochs,
        train_accuracy=train_acc,
        test_accuracy=test_acc,
        final_loss=final_loss,
        seed=seed,
        adversarial_epsilon=adversarial_epsilon,
    )
    logger.info(
        "Training finished after %d epochs: train accuracy %.4f, test accuracy %s",
        epochs,
        train_acc,
        "n/a" if test_acc is None else f"{test_acc:.4f}",
    )
    return network.with_params(network.params, metadata)


def train(
    network: Network,
    dataset: LabeledDataset,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
    testset: LabeledDataset | None = None,
    epoch_callback: Callable[[EpochSummary], None] | None = None,
) -> Network:
    """Train with plain mini-batch SGD on the mean cross-entropy.

    Deterministic given ``seed``. The reported train accuracy covers the full
    train split.

    Raises:
        ValueError: If ``dataset`` is not a train split or a hyperparameter is invalid.
        TrainingDivergedError: If a loss or gradient becomes non-finite.
    """
    if dataset.split is not Split.TRAIN:
        raise ValueError(f"train needs the train split, got {dataset.split.value}")
    _check_hyperparameters(epochs, batch_size, learning_rate)
    trained, final_loss = _run_epochs(
        network, dataset, epochs, batch_size, learning_rate, seed, epoch_callback=epoch_callback
    )
    return _finish(trained, dataset, testset, epochs, final_loss, seed, None)


def adversarial_finetune(
    network: Network,
    dataset: LabeledDataset,
    epochs: int,
    epsilon: float,
    batch_size: int,
    learning_rate: float,
    seed: int,
    testset: LabeledDataset | None = None,
    epoch_callback: Callable[[EpochSummary], None] | None = None,
) -> Network:
    """Continue training with the second half of every batch replaced by FGSM samples.

    The adversarial half is crafted against the parameters current at that
    step, using the ground-truth labels. The loss averages both halves. With
    ``epsilon = 0`` the run is identical to :func:`train` with the same seed.
    A batch of one sample has no second half and stays clean.
    """
    if dataset.split is not Split.TRAIN:
        raise ValueError(f"adversarial_finetune needs the train split, got {dataset.split.value}")
    _check_hyperparameters(epochs, batch_size, learning_rate)
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")

    def replace_half(current: Network, images: np.ndarray, labels: np.ndarray) -> np.ndarray:
        half = len(images) // 2
        if half == 0:
            return images
        mixed = images.copy()
        mixed[half:] = fgsm_batch(current, images[half:], labels[half:], epsilon)
        return mixed

    tuned, final_loss = _run_epochs(
        network,
        dataset,
        epochs,
        batch_size,
        learning_rate,
        seed,
        transform=replace_half,
        epoch_callback=epoch_callback,
    )
    total_epochs = network.metadata.epochs + epochs
    return _finish(tuned, dataset, testset, total_epochs, final_loss, seed, epsilon)
