"""Shared fixtures: tiny datasets and hand-built linear classifiers."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.network import Network
from src.core.numerics import Tensor
from src.core.synthetic import generate_synthetic_dataset
from src.core.trainer import train
from src.models.dataset import LabeledDataset, Split
from src.models.network import LayerKind, LayerSpec, ModelConfig


def linear_network(
    weights: np.ndarray,
    bias: np.ndarray | None = None,
    input_shape: tuple[int, int, int] = (1, 2, 1),
) -> Network:
    """``Z(x) = flatten(x) @ weights + bias`` as a Network."""
    weights = np.asarray(weights, dtype=np.float32)
    n_classes = weights.shape[1]
    config = ModelConfig(
        input_shape=input_shape,
        n_classes=n_classes,
        layers=(LayerSpec(LayerKind.FLATTEN), LayerSpec(LayerKind.DENSE, units=n_classes)),
        seed=0,
    )
    if bias is None:
        bias = np.zeros(n_classes, dtype=np.float32)
    return Network(config, [Tensor(weights), Tensor(np.asarray(bias, dtype=np.float32))])


def pixels(*values: float) -> np.ndarray:
    """A ``(1, k, 1)`` image from raw pixel values."""
    return np.asarray(values, dtype=np.float32).reshape(1, -1, 1)


@pytest.fixture
def two_pixel_network() -> Network:
    """Class 0 when the first pixel is brighter, class 1 otherwise (logits scaled by 10)."""
    return linear_network(10.0 * np.eye(2))


@pytest.fixture
def two_pixel_testset() -> LabeledDataset:
    images = np.stack(
        [pixels(0.7, 0.3), pixels(0.35, 0.65), pixels(0.6, 0.45), pixels(0.2, 0.8), pixels(0.9, 0.1)]
    )
    return LabeledDataset(
        images=images, labels=np.array([0, 1, 0, 1, 0]), split=Split.TEST, n_classes=2
    )


@pytest.fixture(scope="session")
def tiny_trainset() -> LabeledDataset:
    return generate_synthetic_dataset(3, 20, 8, seed=5, split=Split.TRAIN)


@pytest.fixture(scope="session")
def tiny_testset() -> LabeledDataset:
    return generate_synthetic_dataset(3, 12, 8, seed=6, split=Split.TEST)


@pytest.fixture(scope="session")
def tiny_config(tiny_trainset: LabeledDataset) -> ModelConfig:
    return ModelConfig.reference(tiny_trainset.image_shape, tiny_trainset.n_classes, seed=3)


@pytest.fixture(scope="session")
def tiny_network(tiny_config: ModelConfig, tiny_trainset: LabeledDataset) -> Network:
    return train(
        Network.initialize(tiny_config),
        tiny_trainset,
        epochs=6,
        batch_size=16,
        learning_rate=0.05,
        seed=9,
    )
