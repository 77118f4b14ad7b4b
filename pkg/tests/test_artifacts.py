"""Tests for typed artifact save/load."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.core.attack_builder import build_attack_set
from src.core.detector import compute_class_statistics
from src.core.network import Network
from src.models.attack_result import AttackConfig, AttackKind, AttackMode
from src.models.distortion import DistortionSet
from src.storage.artifacts import (
    load_attack_set,
    load_checkpoint,
    load_dataset,
    load_statistics,
    save_attack_set,
    save_checkpoint,
    save_dataset,
    save_statistics,
)
from src.storage.container import ContainerFormatError


class TestDatasets:
    def test_round_trip(self, tmp_path: Path, tiny_testset):
        restored = load_dataset(save_dataset(tmp_path / "test.advt", tiny_testset))
        np.testing.assert_array_equal(restored.images, tiny_testset.images)
        np.testing.assert_array_equal(restored.labels, tiny_testset.labels)
        assert restored.split is tiny_testset.split
        assert restored.n_classes == 3

    def test_wrong_kind(self, tmp_path: Path, tiny_network: Network):
        path = save_checkpoint(tmp_path / "victim.ckpt", tiny_network.to_checkpoint())
        with pytest.raises(ContainerFormatError):
            load_dataset(path)


class TestCheckpoints:
    def test_fingerprint_survives(self, tmp_path: Path, tiny_network: Network):
        path = save_checkpoint(tmp_path / "victim.ckpt", tiny_network.to_checkpoint())
        restored = Network.from_checkpoint(load_checkpoint(path))
        assert restored.fingerprint() == tiny_network.fingerprint()
        assert restored.metadata == tiny_network.metadata
        assert restored.config == tiny_network.config


class TestStatistics:
    def test_round_trip(self, tmp_path: Path, tiny_network: Network, tiny_trainset):
        distortions = DistortionSet.parse("median:3,grayscale")
        stats = compute_class_statistics(tiny_network, tiny_trainset, distortions)
        restored = load_statistics(save_statistics(tmp_path / "s.stats", stats))
        np.testing.assert_array_equal(restored.mu, stats.mu)
        assert restored.distortions == distortions
        assert restored.counts == stats.counts
        assert restored.model_fingerprint == tiny_network.fingerprint()


class TestAttackSets:
    def test_round_trip(self, tmp_path: Path, two_pixel_network: Network, two_pixel_testset):
        config = AttackConfig(name="fgsm4", kind=AttackKind.FGSM, epsilon=0.25)
        attack_set = build_attack_set(
            two_pixel_network, two_pixel_testset, config, two_pixel_network, AttackMode.WHITE_BOX
        )
        restored = load_attack_set(save_attack_set(tmp_path / "a.advt", attack_set, n_classes=2))
        assert restored.config == config
        assert restored.mode is AttackMode.WHITE_BOX
        np.testing.assert_array_equal(restored.images, attack_set.images)
        np.testing.assert_array_equal(restored.source_indices, attack_set.source_indices)
        np.testing.assert_array_equal(restored.victim_predictions, attack_set.victim_predictions)
        assert restored.summary == attack_set.summary
        assert restored.results[0].l2_norm == pytest.approx(attack_set.results[0].l2_norm)
