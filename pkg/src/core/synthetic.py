"""Synthetic glyph benchmark: colored geometric shapes on noisy backgrounds."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from src.models.dataset import LabeledDataset, Split
from src.utils.constants import (
    BACKGROUND_NOISE_STD,
    BACKGROUND_RANGE,
    COLOR_JITTER,
    GLYPH_JITTER_FRACTION,
    GLYPH_SCALE_RANGE,
    MIN_IMAGE_SIZE,
    STORAGE_DTYPE,
)
from src.utils.logger import get_logger

logger = get_logger("core.synthetic")

Mask = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

SHAPES: dict[str, Mask] = {
    "square": lambda dx, dy, r: np.maximum(np.abs(dx), np.abs(dy)) <= r,
    "circle": lambda dx, dy, r: dx**2 + dy**2 <= r**2,
    "triangle": lambda dx, dy, r: (np.abs(dy) <= r) & (np.abs(dx) <= (dy + r) / 2),
    "cross": lambda dx, dy, r: (
        ((np.abs(dx) <= r / 3) & (np.abs(dy) <= r)) | ((np.abs(dy) <= r / 3) & (np.abs(dx) <= r))
    ),
    "diamond": lambda dx, dy, r: np.abs(dx) + np.abs(dy) <= r,
}

COLORS: dict[str, tuple[float, float, float]] = {
    "red": (0.95, 0.1, 0.1),
    "green": (0.1, 0.85, 0.15),
    "blue": (0.15, 0.25, 0.95),
    "yellow": (0.95, 0.9, 0.1),
    "magenta": (0.9, 0.15, 0.85),
    "cyan": (0.1, 0.9, 0.9),
}


def glyph_classes(n_classes: int) -> list[tuple[str, str]]:
    """Shape/color pair of each class. Early classes differ in both shape and color."""
    shapes, colors = list(SHAPES), list(COLORS)
    combos = [
        (shapes[s], colors[(s + k) % len(colors)])
        for k in range(len(colors))
        for s in range(len(shapes))
    ]
    if n_classes > len(combos):
        raise ValueError(f"At most {len(combos)} glyph classes are available, got {n_classes}")
    return combos[:n_classes]


def _render(
    rng: np.random.Generator, shape: str, color: str, image_size: int
) -> np.ndarray:
    coords = (np.arange(image_size) + 0.5) / image_size - 0.5
    grid_y, grid_x = np.meshgrid(coords, coords, indexing="ij")
    center = rng.uniform(-GLYPH_JITTER_FRACTION, GLYPH_JITTER_FRACTION, size=2)
    radius = rng.uniform(*GLYPH_SCALE_RANGE) / 2
    mask = SHAPES[shape](grid_x - center[0], grid_y - center[1], radius)

    background = rng.uniform(*BACKGROUND_RANGE)
    image = background + rng.normal(0.0, BACKGROUND_NOISE_STD, size=(image_size, image_size, 3))
    tint = np.asarray(COLORS[color]) + rng.uniform(-COLOR_JITTER, COLOR_JITTER, size=3)
    image[mask] = tint
    return np.clip(image, 0.0, 1.0)


def generate_synthetic_dataset(
    n_classes: int,
    samples_per_class: int,
    image_size: int,
    seed: int,
    split: Split = Split.TRAIN,
) -> LabeledDataset:
    """Render a balanced RGB glyph dataset, deterministic given ``seed``.

    Raises:
        ValueError: If ``n_classes < 2``, there are more classes than glyph
            combinations, or ``image_size`` is too small to draw a glyph.
    """
    if n_classes < 2:
        raise ValueError(f"n_classes must be >= 2, got {n_classes}")
    if samples_per_class < 1:
        raise ValueError(f"samples_per_class must be >= 1, got {samples_per_class}")
    if image_size < MIN_IMAGE_SIZE:
        raise ValueError(f"image_size must be >= {MIN_IMAGE_SIZE} to render glyphs, got {image_size}")
    classes = glyph_classes(n_classes)

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.repeat(np.arange(n_classes), samples_per_class))
    images = np.stack(
        [_render(rng, *classes[label], image_size) for label in labels]
    ).astype(STORAGE_DTYPE)

    logger.info(
        "Generated %s split: %d classes x %d samples at %dx%d",
        split.value,
        n_classes,
        samples_per_class,
        image_size,
        image_size,
    )
    return LabeledDataset(
        images=images, labels=labels.astype(np.int64), split=split, n_classes=n_classes
    )
