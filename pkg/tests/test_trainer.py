"""Tests for src/core/trainer.py -- SGD training and FGSM fine-tuning."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.network import Network
from src.core.trainer import (
    EpochSummary,
    TrainingDivergedError,
    accuracy,
    adversarial_finetune,
    train,
)
from src.models.dataset import LabeledDataset, Split
from src.models.network import LayerKind, LayerSpec, ModelConfig


def params_equal(a: Network, b: Network) -> bool:
    return all(np.array_equal(p.data, q.data) for p, q in zip(a.params, b.params))


class TestTrain:
    def test_same_seed_same_result(self, tiny_config: ModelConfig, tiny_trainset: LabeledDataset):
        runs = [
            train(Network.initialize(tiny_config), tiny_trainset, 2, 16, 0.05, seed=4)
            for _ in range(2)
        ]
        assert runs[0].fingerprint() == runs[1].fingerprint()

    def test_different_seed_different_result(self, tiny_config, tiny_trainset):
        a = train(Network.initialize(tiny_config), tiny_trainset, 1, 16, 0.05, seed=4)
        b = train(Network.initialize(tiny_config), tiny_trainset, 1, 16, 0.05, seed=5)
        assert a.fingerprint() != b.fingerprint()

    def test_zero_epochs_keeps_parameters(self, tiny_config, tiny_trainset):
        start = Network.initialize(tiny_config)
        result = train(start, tiny_trainset, 0, 16, 0.05, seed=1)
        assert params_equal(start, result)
        assert result.metadata.epochs == 0
        assert result.metadata.final_loss is None

    def test_loss_decreases(self, tiny_config, tiny_trainset):
        summaries: list[EpochSummary] = []
        train(
            Network.initialize(tiny_config),
            tiny_trainset,
            epochs=8,
            batch_size=8,
            learning_rate=0.05,
            seed=2,
            epoch_callback=summaries.append,
        )
        assert [s.epoch for s in summaries] == list(range(8))
        assert summaries[-1].mean_loss < summaries[0].mean_loss

    def test_separable_toy_reaches_full_accuracy(self):
        rng = np.random.default_rng(3)
        bright, dark = rng.uniform(0.6, 0.9, size=20), rng.uniform(0.1, 0.4, size=20)
        pairs = np.concatenate([np.stack([bright, dark], 1), np.stack([dark, bright], 1)])
        toy = LabeledDataset(
            images=pairs.reshape(40, 1, 2, 1).astype(np.float32),
            labels=np.repeat([0, 1], 20),
            split=Split.TRAIN,
            n_classes=2,
        )
        config = ModelConfig(
            input_shape=(1, 2, 1),
            n_classes=2,
            layers=(LayerSpec(LayerKind.FLATTEN), LayerSpec(LayerKind.DENSE, units=2)),
            seed=0,
        )
        trained = train(Network.initialize(config), toy, 50, 8, 0.5, seed=0)
        assert accuracy(trained, toy) == 1.0

    def test_metadata_records_accuracy(self, tiny_network: Network, tiny_trainset, tiny_testset):
        assert tiny_network.metadata.epochs == 6
        assert tiny_network.metadata.seed == 9
        assert tiny_network.metadata.train_accuracy == pytest.approx(accuracy(tiny_network, tiny_trainset))
        assert tiny_network.metadata.test_accuracy is None

        with_test = train(tiny_network, tiny_trainset, 0, 16, 0.05, seed=9, testset=tiny_testset)
        assert with_test.metadata.test_accuracy == pytest.approx(accuracy(tiny_network, tiny_testset))

    def test_rejects_test_split(self, tiny_config, tiny_testset):
        with pytest.raises(ValueError):
            train(Network.initialize(tiny_config), tiny_testset, 1, 16, 0.05, seed=1)

    @pytest.mark.parametrize(
        ("epochs", "batch_size", "learning_rate"), [(-1, 16, 0.05), (1, 0, 0.05), (1, 16, 0.0)]
    )
    def test_rejects_bad_hyperparameters(self, tiny_config, tiny_trainset, epochs, batch_size, learning_rate):
        with pytest.raises(ValueError):
            train(Network.initialize(tiny_config), tiny_trainset, epochs, batch_size, learning_rate, seed=1)

    def test_divergence_is_reported(self, tiny_config, tiny_trainset):
        with pytest.raises(TrainingDivergedError) as info:
            train(Network.initialize(tiny_config), tiny_trainset, 3, 60, 1e30, seed=1)
        assert info.value.epoch >= 0

    def test_accuracy_of_empty_dataset(self, tiny_network: Network):
        empty = LabeledDataset(
            images=np.zeros((0, 8, 8, 3), dtype=np.float32),
            labels=np.zeros(0, dtype=np.int64),
            split=Split.TEST,
            n_classes=3,
        )
        assert accuracy(tiny_network, empty) == 0.0


class TestAdversarialFinetune:
    def test_zero_epsilon_matches_plain_training(self, tiny_network: Network, tiny_trainset):
        plain = train(tiny_network, tiny_trainset, 2, 16, 0.02, seed=13)
        tuned = adversarial_finetune(tiny_network, tiny_trainset, 2, 0.0, 16, 0.02, seed=13)
        assert params_equal(plain, tuned)

    def test_epochs_are_cumulative(self, tiny_network: Network, tiny_trainset):
        tuned = adversarial_finetune(tiny_network, tiny_trainset, 1, 0.05, 16, 0.02, seed=13)
        assert tuned.metadata.epochs == tiny_network.metadata.epochs + 1
        assert tuned.metadata.adversarial_epsilon == 0.05

    def test_changes_parameters(self, tiny_network: Network, tiny_trainset):
        tuned = adversarial_finetune(tiny_network, tiny_trainset, 1, 0.05, 16, 0.02, seed=13)
        assert tuned.fingerprint() != tiny_network.fingerprint()

    def test_single_sample_batches_stay_clean(self, tiny_network: Network, tiny_trainset):
        plain = train(tiny_network, tiny_trainset, 1, 1, 0.02, seed=13)
        tuned = adversarial_finetune(tiny_network, tiny_trainset, 1, 0.3, 1, 0.02, seed=13)
        assert params_equal(plain, tuned)

    def test_rejects_negative_epsilon(self, tiny_network: Network, tiny_trainset):
        with pytest.raises(ValueError):
            adversarial_finetune(tiny_network, tiny_trainset, 1, -0.1, 16, 0.02, seed=13)
