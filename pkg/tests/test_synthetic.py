"""Tests for the synthetic glyph benchmark."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.synthetic import generate_synthetic_dataset, glyph_classes
from src.models.dataset import Split


class TestGenerateSyntheticDataset:
    def test_shape_and_range(self):
        dataset = generate_synthetic_dataset(4, 5, 10, seed=1)
        assert dataset.images.shape == (20, 10, 10, 3)
        assert dataset.images.dtype == np.float32
        assert dataset.images.min() >= 0.0
        assert dataset.images.max() <= 1.0

    def test_balanced_classes(self):
        dataset = generate_synthetic_dataset(3, 7, 8, seed=2)
        assert dataset.class_counts().tolist() == [7, 7, 7]

    def test_deterministic(self):
        a = generate_synthetic_dataset(3, 4, 8, seed=3)
        b = generate_synthetic_dataset(3, 4, 8, seed=3)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_seed_matters(self):
        a = generate_synthetic_dataset(3, 4, 8, seed=3)
        b = generate_synthetic_dataset(3, 4, 8, seed=4)
        assert not np.array_equal(a.images, b.images)

    def test_split_is_recorded(self):
        assert generate_synthetic_dataset(2, 1, 8, seed=0, split=Split.TEST).split is Split.TEST

    @pytest.mark.parametrize(
        ("n_classes", "per_class", "size"), [(1, 5, 8), (3, 0, 8), (3, 5, 4), (1000, 1, 8)]
    )
    def test_rejects_bad_arguments(self, n_classes, per_class, size):
        with pytest.raises(ValueError):
            generate_synthetic_dataset(n_classes, per_class, size, seed=0)


class TestGlyphClasses:
    def test_pairs_are_unique(self):
        classes = glyph_classes(10)
        assert len(set(classes)) == 10

    def test_first_classes_differ_in_shape_and_color(self):
        classes = glyph_classes(5)
        assert len({shape for shape, _ in classes}) == 5
        assert len({color for _, color in classes}) == 5
