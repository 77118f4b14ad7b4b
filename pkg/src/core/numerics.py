"""Dense tensors, a reverse-mode computation tape, and first-order optimizers.

Tensors are immutable wrappers around numpy arrays. While a
:class:`ComputationTape` is active (``with tape: ...``) every op records a
node holding its inputs, output, and vector-Jacobian product, so
:func:`backward` can replay the tape in reverse recording order.

Tapes are confined to the thread that entered them.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, STORAGE_DTYPE

Array = npt.NDArray[np.floating]
Padding = Literal["same", "valid"]
Reduction = Literal["mean", "sum"]


class ShapeError(ValueError):
    """Raised when operand shapes do not satisfy an op's shape rule."""


class Tensor:
    """Immutable dense array of real numbers.

    Float arrays keep their dtype (float64 inputs stay float64); anything
    else is stored as float32.
    """

    __slots__ = ("_data",)

    def __init__(self, data: npt.ArrayLike) -> None:
        if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
            arr = np.array(data, copy=True)
        else:
            arr = np.array(data, dtype=STORAGE_DTYPE)
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> Tensor:
        """Adopt ``arr`` without copying. The caller must not keep a mutable alias."""
        tensor = cls.__new__(cls)
        arr.setflags(write=False)
        tensor._data = arr
        return tensor

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self._data.shape)

    @property
    def dtype(self) -> np.dtype:
        return self._data.dtype

    @property
    def size(self) -> int:
        return int(self._data.size)

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the underlying array."""
        return np.array(self._data, copy=True)

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self._data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"


VjpFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@dataclass
class TapeNode:
    """One recorded primitive op."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: VjpFn


_active = threading.local()


def _stack() -> list[ComputationTape | None]:
    if not hasattr(_active, "stack"):
        _active.stack = []
    stack: list[ComputationTape | None] = _active.stack
    return stack


def _active_tape() -> ComputationTape | None:
    stack = _stack()
    return stack[-1] if stack else None


@contextmanager
def recording_paused() -> Iterator[None]:
    """Evaluate ops without recording them, even inside an active tape."""
    stack = _stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


@dataclass
class ComputationTape:
    """Ordered record of primitive ops for the backward pass."""

    nodes: list[TapeNode] = field(default_factory=list)
    _producers: dict[int, TapeNode] = field(default_factory=dict, repr=False)
    _owner: int | None = field(default=None, repr=False)

    def __enter__(self) -> ComputationTape:
        owner = threading.get_ident()
        if self._owner is not None and self._owner != owner:
            raise RuntimeError("A ComputationTape is confined to the thread that first used it")
        self._owner = owner
        _stack().append(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        _stack().pop()

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)
        self._producers[id(node.output)] = node

    def produced(self, tensor: Tensor) -> bool:
        """True when ``tensor`` is the output of a node on this tape."""
        return id(tensor) in self._producers


def _emit(op: str, inputs: tuple[Tensor, ...], out: np.ndarray, vjp: VjpFn) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"{op} produced non-finite values")
    result = Tensor._wrap(out)
    tape = _active_tape()
    if tape is not None:
        tape.record(TapeNode(op=op, inputs=inputs, output=result, vjp=vjp))
    return result


def _sum_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead))) if lead else grad


# ------------------------------------------------------------------
# forward ops
# ------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may match ``a`` or its trailing dimensions (bias)."""
    if a.shape != b.shape and a.shape[len(a.shape) - len(b.shape) :] != b.shape:
        raise ShapeError(f"add: cannot combine shapes {a.shape} and {b.shape}")
    out = a.data + b.data

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g, _sum_to_shape(g, b.shape)

    return _emit("add", (a, b), out, vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of equal-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    out = a.data * b.data

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g * b.data, g * a.data

    return _emit("mul", (a, b), out, vjp)


def total(x: Tensor) -> Tensor:
    """Sum of all elements as a scalar tensor."""
    out = np.asarray(x.data.sum())

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return _emit("sum", (x,), out, vjp)


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(x * weights)`` for a constant weight array of ``x``'s shape."""
    if tuple(weights.shape) != x.shape:
        raise ShapeError(f"weighted_sum: weights {weights.shape} vs input {x.shape}")
    out = np.asarray((x.data * weights).sum())

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * weights,)

    return _emit("weighted_sum", (x,), out, vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of ``(B, K)`` and ``(K, N)``."""
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ b.data.T, a.data.T @ g

    return _emit("matmul", (a, b), out, vjp)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * mask,)

    return _emit("relu", (x,), out, vjp)


def flatten(x: Tensor) -> Tensor:
    """Collapse every axis after the batch axis."""
    if len(x.shape) < 2:
        raise ShapeError(f"flatten: need a batch axis, got shape {x.shape}")
    out = x.data.reshape(x.shape[0], -1)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(x.shape),)

    return _emit("flatten", (x,), out.copy(), vjp)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, padding: Padding = "same") -> Tensor:
    """Stride-1 convolution of NHWC ``x`` with an ``(kh, kw, C_in, C_out)`` kernel.

    ``"same"`` zero-pads ``k // 2`` on each side and needs odd kernel sizes.
    """
    if len(x.shape) != 4 or len(kernel.shape) != 4:
        raise ShapeError(f"conv2d: expected NHWC input and 4-D kernel, got {x.shape} and {kernel.shape}")
    kh, kw, c_in, c_out = kernel.shape
    if x.shape[3] != c_in:
        raise ShapeError(f"conv2d: input channels {x.shape} do not match kernel {kernel.shape}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} does not match kernel {kernel.shape}")
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"conv2d: 'same' padding needs odd kernel sizes, got {kernel.shape}")
        ph, pw = kh // 2, kw // 2
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ValueError(f"conv2d: unknown padding {padding!r}")
    if x.shape[1] + 2 * ph < kh or x.shape[2] + 2 * pw < kw:
        raise ShapeError(f"conv2d: input {x.shape} smaller than kernel {kernel.shape}")

    padded = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    # (B, Ho, Wo, C_in, kh, kw)
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    out = np.einsum("bhwcij,ijco->bhwo", windows, kernel.data, optimize=True) + bias.data
    out_h, out_w = out.shape[1], out.shape[2]

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_kernel = np.einsum("bhwcij,bhwo->ijco", windows, g, optimize=True)
        g_bias = g.sum(axis=(0, 1, 2))
        g_padded = np.zeros(padded.shape, dtype=np.result_type(g, kernel.data))
        for i in range(kh):
            for j in range(kw):
                g_padded[:, i : i + out_h, j : j + out_w, :] += g @ kernel.data[i, j].T
        g_x = g_padded[:, ph : ph + x.shape[1], pw : pw + x.shape[2], :]
        return g_x, g_kernel, g_bias

    return _emit("conv2d", (x, kernel, bias), out.astype(x.dtype), vjp)


def maxpool(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping ``size x size`` max pooling on NHWC input.

    Trailing rows/columns that do not fill a window are dropped. The gradient
    flows to the first maximum of each window.
    """
    if len(x.shape) != 4:
        raise ShapeError(f"maxpool: expected NHWC input, got shape {x.shape}")
    batch, height, width, channels = x.shape
    out_h, out_w = height // size, width // size
    if out_h == 0 or out_w == 0:
        raise ShapeError(f"maxpool: input {x.shape} smaller than window {size}x{size}")
    cropped = x.data[:, : out_h * size, : out_w * size, :]
    blocks = (
        cropped.reshape(batch, out_h, size, out_w, size, channels)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(batch, out_h, out_w, channels, size * size)
    )
    winner = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        g_blocks = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(g_blocks, winner[..., None], g[..., None], axis=-1)
        g_cropped = (
            g_blocks.reshape(batch, out_h, out_w, channels, size, size)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(batch, out_h * size, out_w * size, channels)
        )
        g_x = np.zeros(x.shape, dtype=g.dtype)
        g_x[:, : out_h * size, : out_w * size, :] = g_cropped
        return (g_x,)

    return _emit("maxpool", (x,), out, vjp)


def stable_softmax(z: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax of a plain array over its last axis."""
    shifted = z - z.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis (max-subtracted)."""
    out = stable_softmax(x.data)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", (x,), out, vjp)


def _check_labels(shape: tuple[int, ...], labels: np.ndarray, op: str) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(shape) != 2 or labels.shape[0] != shape[0]:
        raise ShapeError(f"{op}: predictions {shape} vs labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= shape[1]):
        raise ValueError(f"{op}: labels must lie in [0, {shape[1]})")
    return labels


def cross_entropy(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under probability rows ``probs``."""
    labels = _check_labels(probs.shape, labels, "cross_entropy")
    rows = np.arange(probs.shape[0])
    tiny = np.finfo(probs.dtype).tiny
    picked = np.maximum(probs.data[rows, labels], tiny)
    out = np.asarray(-np.log(picked.astype(np.float64)).mean())

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(probs.shape, dtype=np.float64)
        grad[rows, labels] = -1.0 / (picked * probs.shape[0])
        return (g * grad,)

    return _emit("cross_entropy", (probs,), out, vjp)


def softmax_cross_entropy(
    logits: Tensor, labels: np.ndarray, reduction: Reduction = "mean"
) -> Tensor:
    """Fused, numerically stable softmax + cross-entropy on logits."""
    labels = _check_labels(logits.shape, labels, "softmax_cross_entropy")
    rows = np.arange(logits.shape[0])
    z = logits.data.astype(np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1))
    losses = log_norm - shifted[rows, labels]
    scale = 1.0 / logits.shape[0] if reduction == "mean" else 1.0
    out = np.asarray(losses.sum() * scale)
    probs = np.exp(shifted - log_norm[:, None])

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        grad = probs.copy()
        grad[rows, labels] -= 1.0
        return ((g * scale * grad).astype(logits.dtype),)

    return _emit("softmax_cross_entropy", (logits,), out, vjp)


# ------------------------------------------------------------------
# reverse pass
# ------------------------------------------------------------------


def backward(tape: ComputationTape, loss: Tensor, wrt: Sequence[Tensor]) -> list[Tensor]:
    """Gradients of a scalar ``loss`` with respect to each tensor in ``wrt``.

    Tensors the loss does not depend on get all-zero gradients.

    Raises:
        ValueError: If ``loss`` was not recorded on ``tape``.
        ShapeError: If ``loss`` is not a scalar.
    """
    if not tape.produced(loss):
        raise ValueError("backward: loss is not recorded on this tape")
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=np.float64)}
    for node in reversed(tape.nodes):
        upstream = grads.get(id(node.output))
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.vjp(upstream)):
            if grad is None:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad

    results = []
    for tensor in wrt:
        grad = grads.get(id(tensor))
        if grad is None:
            grad = np.zeros(tensor.shape, dtype=tensor.dtype)
        results.append(Tensor._wrap(np.asarray(grad, dtype=tensor.dtype).reshape(tensor.shape)))
    return results


# ------------------------------------------------------------------
# optimizers
# ------------------------------------------------------------------


def sgd_step(
    params: Sequence[Tensor], grads: Sequence[Tensor], learning_rate: float
) -> list[Tensor]:
    """Return ``param - learning_rate * grad`` for each pair.

    Raises:
        ShapeError: If a gradient shape differs from its parameter.
        FloatingPointError: If any gradient holds NaN/Inf.
    """
    if len(params) != len(grads):
        raise ShapeError(f"sgd_step: {len(params)} params but {len(grads)} gradients")
    updated = []
    for index, (param, grad) in enumerate(zip(params, grads)):
        if param.shape != grad.shape:
            raise ShapeError(f"sgd_step: param {index} shape {param.shape} vs grad {grad.shape}")
        if not np.all(np.isfinite(grad.data)):
            raise FloatingPointError(f"sgd_step: non-finite gradient for param {index}")
        step = (param.data - learning_rate * grad.data).astype(param.dtype)
        updated.append(Tensor._wrap(step))
    return updated


@dataclass
class AdamState:
    """Per-array Adam moments for a single optimisation variable."""

    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    step_count: int = 0
    first_moment: np.ndarray | None = None
    second_moment: np.ndarray | None = None

    def step(self, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return the updated copy of ``value``."""
        if self.first_moment is None or self.second_moment is None:
            self.first_moment = np.zeros_like(grad, dtype=np.float64)
            self.second_moment = np.zeros_like(grad, dtype=np.float64)
        self.step_count += 1
        self.first_moment = self.beta1 * self.first_moment + (1 - self.beta1) * grad
        self.second_moment = self.beta2 * self.second_moment + (1 - self.beta2) * grad**2
        m_hat = self.first_moment / (1 - self.beta1**self.step_count)
        v_hat = self.second_moment / (1 - self.beta2**self.step_count)
        return value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
