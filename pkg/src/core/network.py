"""Feed-forward image classifier built on the numerics tape."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Sequence

import numpy as np

from src.core.numerics import (
    ComputationTape,
    ShapeError,
    Tensor,
    add,
    backward,
    conv2d,
    flatten,
    matmul,
    maxpool,
    recording_paused,
    relu,
    softmax_cross_entropy,
    stable_softmax,
    weighted_sum,
)
from src.models.network import Checkpoint, LayerKind, ModelConfig, TrainingMetadata
from src.utils.constants import PREDICT_CHUNK_SIZE, STORAGE_DTYPE
from src.utils.logger import get_logger

logger = get_logger("core.network")


def _glorot_bound(shape: tuple[int, ...]) -> float:
    if len(shape) == 4:
        receptive = shape[0] * shape[1]
        fan_in, fan_out = receptive * shape[2], receptive * shape[3]
    else:
        fan_in, fan_out = shape[0], shape[1]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


class Network:
    """A classifier: a :class:`ModelConfig` plus its parameter tensors.

    Instances are immutable; training produces new instances. Prediction is
    thread-safe because tapes are thread-local and parameters are read-only.
    """

    def __init__(
        self,
        config: ModelConfig,
        params: Sequence[Tensor],
        metadata: TrainingMetadata | None = None,
    ) -> None:
        shapes = config.parameter_shapes()
        if len(params) != len(shapes):
            raise ShapeError(f"Expected {len(shapes)} parameter tensors, got {len(params)}")
        for (name, shape), tensor in zip(shapes, params):
            if tensor.shape != shape:
                raise ShapeError(f"Parameter {name}: shape {tensor.shape} vs expected {shape}")
        self.config = config
        self.metadata = metadata or TrainingMetadata()
        self._params = tuple(params)
        self._names = tuple(name for name, _ in shapes)

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def initialize(cls, config: ModelConfig) -> Network:
        """Glorot-uniform weights and zero biases, drawn from ``config.seed``."""
        rng = np.random.default_rng(config.seed)
        params = []
        for name, shape in config.parameter_shapes():
            if name.endswith(".bias"):
                values = np.zeros(shape, dtype=STORAGE_DTYPE)
            else:
                bound = _glorot_bound(shape)
                values = rng.uniform(-bound, bound, size=shape).astype(STORAGE_DTYPE)
            params.append(Tensor(values))
        return cls(config, params)

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> Network:
        return cls(
            checkpoint.config,
            [Tensor(np.asarray(values)) for values in checkpoint.params.values()],
            checkpoint.metadata,
        )

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            config=self.config,
            params={name: tensor.numpy() for name, tensor in zip(self._names, self._params)},
            metadata=self.metadata,
        )

    def with_params(
        self, params: Sequence[Tensor], metadata: TrainingMetadata | None = None
    ) -> Network:
        return Network(self.config, params, metadata or self.metadata)

    def astype(self, dtype: np.dtype | type) -> Network:
        """A copy computing in ``dtype`` (float64 for gradient checks)."""
        return self.with_params([Tensor(p.data.astype(dtype)) for p in self._params])

    @property
    def params(self) -> tuple[Tensor, ...]:
        return self._params

    @property
    def dtype(self) -> np.dtype:
        return self._params[0].dtype

    @property
    def n_classes(self) -> int:
        return self.config.n_classes

    def fingerprint(self) -> str:
        """SHA-256 over the architecture and the float32 parameter bytes."""
        digest = hashlib.sha256(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        for name, tensor in zip(self._names, self._params):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())
        return digest.hexdigest()

    # ------------------------------------------------------------------
    # forward
    # ------------------------------------------------------------------

    def _as_batch(self, images: np.ndarray) -> Tensor:
        batch = np.asarray(images)
        if tuple(batch.shape[1:]) != self.config.input_shape:
            raise ShapeError(
                f"Input shape {batch.shape[1:]} does not match model input {self.config.input_shape}"
            )
        return Tensor(batch.astype(self.dtype, copy=False))

    def forward(self, x: Tensor, params: Sequence[Tensor] | None = None) -> Tensor:
        """Logits for an ``(N, H, W, C)`` batch. Ops record on any active tape."""
        if x.shape[1:] != self.config.input_shape:
            raise ShapeError(
                f"Input shape {x.shape[1:]} does not match model input {self.config.input_shape}"
            )
        remaining = iter(self._params if params is None else params)
        out = x
        for layer in self.config.layers:
            if layer.kind is LayerKind.CONV:
                kernel, bias = next(remaining), next(remaining)
                out = conv2d(out, kernel, bias, padding=layer.padding)  # type: ignore[arg-type]
            elif layer.kind is LayerKind.RELU:
                out = relu(out)
            elif layer.kind is LayerKind.MAXPOOL:
                out = maxpool(out, layer.pool_size)
            elif layer.kind is LayerKind.FLATTEN:
                out = flatten(out)
            elif layer.kind is LayerKind.DENSE:
                weight, bias = next(remaining), next(remaining)
                out = add(matmul(out, weight), bias)
        return out

    def logits_batch(self, images: np.ndarray) -> np.ndarray:
        """Logits for a batch, evaluated without recording."""
        chunks = []
        with recording_paused():
            for start in range(0, len(images), PREDICT_CHUNK_SIZE):
                chunk = self._as_batch(images[start : start + PREDICT_CHUNK_SIZE])
                chunks.append(self.forward(chunk).numpy())
        if not chunks:
            return np.zeros((0, self.n_classes), dtype=self.dtype)
        return np.concatenate(chunks)

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        """``(N, n)`` float64 prediction vectors."""
        return stable_softmax(self.logits_batch(images).astype(np.float64))

    def predict(self, image: np.ndarray) -> np.ndarray:
        """Prediction vector ``f(x)`` of one ``(H, W, C)`` image."""
        return self.predict_batch(np.asarray(image)[None])[0]

    def classify_batch(self, images: np.ndarray) -> np.ndarray:
        """Argmax class of every image."""
        return self.predict_batch(images).argmax(axis=1)

    # ------------------------------------------------------------------
    # gradients
    # ------------------------------------------------------------------

    def loss_and_gradients(
        self, images: np.ndarray, labels: np.ndarray
    ) -> tuple[float, list[Tensor]]:
        """Mean cross-entropy of a batch and its gradient for every parameter."""
        x = self._as_batch(images)
        with ComputationTape() as tape:
            loss = softmax_cross_entropy(self.forward(x), labels)
        return loss.item(), backward(tape, loss, self._params)

    def input_gradient_batch(self, images: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Per-sample ``d L(x_i, l_i) / d x_i`` for a batch.

        The summed loss separates over samples, so each row is that sample's
        own gradient.
        """
        x = self._as_batch(images)
        with ComputationTape() as tape:
            loss = softmax_cross_entropy(self.forward(x), labels, reduction="sum")
        (grad,) = backward(tape, loss, [x])
        return grad.numpy()

    def input_gradient(self, image: np.ndarray, label: int) -> np.ndarray:
        """Cross-entropy gradient with respect to the pixels of one image."""
        return self.input_gradient_batch(np.asarray(image)[None], np.array([label]))[0]

    def margin_gradient(
        self, image: np.ndarray, true_class: int
    ) -> tuple[np.ndarray, int, np.ndarray]:
        """Logits, the strongest other class, and the pixel gradient of
        ``Z_true - Z_other`` at ``image``.
        """
        x = self._as_batch(np.asarray(image)[None])
        with ComputationTape() as tape:
            logits = self.forward(x)
            z = logits.data[0].astype(np.float64)
            others = z.copy()
            others[true_class] = -np.inf
            other = int(np.argmax(others))
            weights = np.zeros((1, self.n_classes), dtype=np.float64)
            weights[0, true_class], weights[0, other] = 1.0, -1.0
            objective = weighted_sum(logits, weights)
        (grad,) = backward(tape, objective, [x])
        return z, other, grad.numpy()[0]

    def logit_jacobian(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Logits ``Z(x)`` and the ``(n, H, W, C)`` Jacobian ``dZ/dx``.

        One forward pass; one reverse sweep per class.
        """
        x = self._as_batch(np.asarray(image)[None])
        rows = []
        with ComputationTape() as tape:
            logits = self.forward(x)
            objectives = [
                weighted_sum(logits, np.eye(self.n_classes, dtype=np.float64)[k][None])
                for k in range(self.n_classes)
            ]
        for objective in objectives:
            (grad,) = backward(tape, objective, [x])
            rows.append(grad.numpy()[0])
        return logits.numpy()[0], np.stack(rows)
