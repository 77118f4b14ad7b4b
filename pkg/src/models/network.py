"""Model architecture, training metadata, and checkpoint models."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from src.utils.constants import (
    DEFAULT_CONV_CHANNELS,
    DEFAULT_DENSE_UNITS,
    DEFAULT_KERNEL_SIZE,
    DEFAULT_POOL_SIZE,
)


class LayerKind(Enum):
    """Layer types understood by the network builder."""

    CONV = "conv"
    RELU = "relu"
    MAXPOOL = "maxpool"
    FLATTEN = "flatten"
    DENSE = "dense"

    def has_parameters(self) -> bool:
        return self in {LayerKind.CONV, LayerKind.DENSE}


@dataclass(frozen=True)
class LayerSpec:
    """One layer description.

    Attributes:
        kind: Layer type.
        units: Output channels (conv) or output width (dense). Unused otherwise.
        kernel_size: Square kernel side for conv layers.
        padding: ``"same"`` or ``"valid"`` for conv layers.
        pool_size: Window side for maxpool layers.
    """

    kind: LayerKind
    units: int = 0
    kernel_size: int = DEFAULT_KERNEL_SIZE
    padding: str = "same"
    pool_size: int = DEFAULT_POOL_SIZE

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LayerSpec:
        return cls(
            kind=LayerKind(data["kind"]),
            units=int(data.get("units", 0)),
            kernel_size=int(data.get("kernel_size", DEFAULT_KERNEL_SIZE)),
            padding=str(data.get("padding", "same")),
            pool_size=int(data.get("pool_size", DEFAULT_POOL_SIZE)),
        )


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of a classifier.

    Attributes:
        input_shape: ``(H, W, C)`` of the images the model accepts.
        n_classes: Number of output classes ``n``.
        layers: Ordered layer descriptions. The last parametrised layer must be
            a dense layer of width ``n_classes``.
        seed: Seed for parameter initialization.
    """

    input_shape: tuple[int, int, int]
    n_classes: int
    layers: tuple[LayerSpec, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input_shape must be (H, W, C) with positive dims, got {self.input_shape}")
        parametrised = [layer for layer in self.layers if layer.kind.has_parameters()]
        if not parametrised or parametrised[-1].kind is not LayerKind.DENSE:
            raise ValueError("The last parametrised layer must be dense")
        if parametrised[-1].units != self.n_classes:
            raise ValueError(
                f"Final layer width {parametrised[-1].units} != n_classes {self.n_classes}"
            )
        # Runs the shape rules once so bad configs fail at construction.
        self.parameter_shapes()

    def parameter_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Names and shapes of every parameter, in declaration order."""
        height, width, channels = self.input_shape
        flat: int | None = None
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for index, layer in enumerate(self.layers):
            prefix = f"layer{index}"
            if layer.kind is LayerKind.CONV:
                if flat is not None:
                    raise ValueError(f"{prefix}: conv after flatten")
                k = layer.kernel_size
                shapes.append((f"{prefix}.kernel", (k, k, channels, layer.units)))
                shapes.append((f"{prefix}.bias", (layer.units,)))
                if layer.padding == "valid":
                    height, width = height - k + 1, width - k + 1
                elif layer.padding != "same":
                    raise ValueError(f"{prefix}: unknown padding {layer.padding!r}")
                channels = layer.units
            elif layer.kind is LayerKind.MAXPOOL:
                height, width = height // layer.pool_size, width // layer.pool_size
            elif layer.kind is LayerKind.FLATTEN:
                flat = height * width * channels
            elif layer.kind is LayerKind.DENSE:
                if flat is None:
                    raise ValueError(f"{prefix}: dense layer needs a preceding flatten")
                shapes.append((f"{prefix}.weight", (flat, layer.units)))
                shapes.append((f"{prefix}.bias", (layer.units,)))
                flat = layer.units
            if height < 1 or width < 1:
                raise ValueError(f"{prefix}: spatial size collapsed to {height}x{width}")
        return shapes

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_shape": list(self.input_shape),
            "n_classes": self.n_classes,
            "layers": [layer.to_dict() for layer in self.layers],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        height, width, channels = (int(v) for v in data["input_shape"])
        return cls(
            input_shape=(height, width, channels),
            n_classes=int(data["n_classes"]),
            layers=tuple(LayerSpec.from_dict(layer) for layer in data["layers"]),
            seed=int(data["seed"]),
        )

    @classmethod
    def reference(
        cls,
        input_shape: tuple[int, int, int],
        n_classes: int,
        seed: int,
        width_multiplier: int = 1,
    ) -> ModelConfig:
        """The desk-scale CNN: conv-relu-pool twice, then dense-relu-dense.

        The substitute model uses ``width_multiplier=2`` and its own seed.
        """
        first, second = (c * width_multiplier for c in DEFAULT_CONV_CHANNELS)
        layers = (
            LayerSpec(LayerKind.CONV, units=first),
            LayerSpec(LayerKind.RELU),
            LayerSpec(LayerKind.MAXPOOL),
            LayerSpec(LayerKind.CONV, units=second),
            LayerSpec(LayerKind.RELU),
            LayerSpec(LayerKind.MAXPOOL),
            LayerSpec(LayerKind.FLATTEN),
            LayerSpec(LayerKind.DENSE, units=DEFAULT_DENSE_UNITS * width_multiplier),
            LayerSpec(LayerKind.RELU),
            LayerSpec(LayerKind.DENSE, units=n_classes),
        )
        return cls(input_shape=input_shape, n_classes=n_classes, layers=layers, seed=seed)


@dataclass(frozen=True)
class TrainingMetadata:
    """How a checkpoint was produced.

    Attributes:
        epochs: Epochs run (cumulative across fine-tuning).
        train_accuracy: Accuracy on the full train split after training.
        test_accuracy: Accuracy on the held-out split, if one was supplied.
        final_loss: Mean loss of the last epoch (None when no epoch ran).
        seed: Shuffle seed of the last training call.
        adversarial_epsilon: FGSM step of adversarial fine-tuning, if any.
    """

    epochs: int = 0
    train_accuracy: float | None = None
    test_accuracy: float | None = None
    final_loss: float | None = None
    seed: int | None = None
    adversarial_epsilon: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainingMetadata:
        known = {name for name in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class Checkpoint:
    """A model configuration with its parameter arrays.

    Attributes:
        config: Architecture the parameters belong to.
        params: Parameter arrays keyed by name, in declaration order.
        metadata: Training provenance.
    """

    config: ModelConfig
    params: dict[str, np.ndarray]
    metadata: TrainingMetadata = field(default_factory=TrainingMetadata)

    def __post_init__(self) -> None:
        expected = self.config.parameter_shapes()
        if [name for name, _ in expected] != list(self.params):
            raise ValueError(
                f"Checkpoint parameters {list(self.params)} do not match "
                f"config parameters {[name for name, _ in expected]}"
            )
        for name, shape in expected:
            if tuple(self.params[name].shape) != shape:
                raise ValueError(
                    f"Parameter {name} has shape {self.params[name].shape}, expected {shape}"
                )
