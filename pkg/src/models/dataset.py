"""Labeled image dataset model."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Split(Enum):
    """Which part of the benchmark a dataset holds."""

    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class LabeledDataset:
    """Images in ``[0, 1]`` with class labels.

    Attributes:
        images: ``(N, H, W, C)`` float32 array.
        labels: ``(N,)`` int64 array of class indices in ``[0, n_classes)``.
        split: Train or test.
        n_classes: Number of classes ``n``.
    """

    images: np.ndarray
    labels: np.ndarray
    split: Split
    n_classes: int

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, H, W, C), got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError(
                f"{self.images.shape[0]} images but labels have shape {self.labels.shape}"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("image intensities must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        height, width, channels = self.images.shape[1:]
        return int(height), int(width), int(channels)

    def class_counts(self) -> np.ndarray:
        """Samples per class, length ``n_classes``."""
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: np.ndarray) -> LabeledDataset:
        """A new dataset holding the given rows, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            images=self.images[indices],
            labels=self.labels[indices],
            split=self.split,
            n_classes=self.n_classes,
        )
