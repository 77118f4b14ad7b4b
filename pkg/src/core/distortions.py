"""Image distortions: median filter, bit-depth reduction, gray-scale stacking.

Every distortion maps an ``(H, W, C)`` image in ``[0, 1]`` to an image of the
same shape and range. Batch variants take ``(N, H, W, C)``.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import median_filter as _ndimage_median

from src.models.distortion import DistortionKind, DistortionSet, DistortionSpec
from src.utils.constants import LUMA_WEIGHTS, MAX_BIT_DEPTH, MIN_BIT_DEPTH


class DistortionError(ValueError):
    """A distortion of a set failed; ``index`` is its position in the set."""

    def __init__(self, index: int, spec: DistortionSpec, cause: Exception) -> None:
        super().__init__(f"Distortion {index} ({spec.descriptor}) failed: {cause}")
        self.index = index
        self.spec = spec


def _check_window(window: int, spatial: tuple[int, int]) -> None:
    if window < 3 or window % 2 == 0:
        raise ValueError(f"Median window must be an odd integer >= 3, got {window}")
    if min(spatial) < window:
        raise ValueError(f"Image of size {spatial} is smaller than the {window}x{window} window")


def median_filter(image: np.ndarray, window: int) -> np.ndarray:
    """Per-channel spatial median with edge replication at the borders."""
    if image.ndim != 3:
        raise ValueError(f"Expected an (H, W, C) image, got shape {image.shape}")
    _check_window(window, image.shape[:2])
    return _ndimage_median(image, size=(window, window, 1), mode="nearest")


def median_filter_batch(images: np.ndarray, window: int) -> np.ndarray:
    _check_window(window, images.shape[1:3])
    return _ndimage_median(images, size=(1, window, window, 1), mode="nearest")


def bit_depth_reduce(image: np.ndarray, bits: int) -> np.ndarray:
    """Re-quantize to ``2**bits`` levels: ``round(x * L) / L`` with ``L = 2**bits - 1``.

    Works for single images and batches alike.
    """
    if not MIN_BIT_DEPTH <= bits <= MAX_BIT_DEPTH:
        raise ValueError(f"bits must lie in [{MIN_BIT_DEPTH}, {MAX_BIT_DEPTH}], got {bits}")
    levels = float(2**bits - 1)
    return (np.round(image * levels) / levels).astype(image.dtype)


def grayscale_stack(image: np.ndarray) -> np.ndarray:
    """BT.601 luma replicated into three channels. Accepts ``(..., H, W, 3)``."""
    if image.shape[-1] != 3:
        raise ValueError(f"grayscale_stack needs 3 channels, got {image.shape[-1]}")
    luma = image @ np.asarray(LUMA_WEIGHTS, dtype=image.dtype)
    return np.clip(np.repeat(luma[..., None], 3, axis=-1), 0.0, 1.0).astype(image.dtype)


def apply_distortion(images: np.ndarray, spec: DistortionSpec) -> np.ndarray:
    """Apply one distortion to a single image or a batch."""
    batched = images.ndim == 4
    if spec.kind is DistortionKind.MEDIAN:
        window = int(spec.parameter or 0)
        return median_filter_batch(images, window) if batched else median_filter(images, window)
    if spec.kind is DistortionKind.BIT_DEPTH:
        return bit_depth_reduce(images, int(spec.parameter or 0))
    return grayscale_stack(images)


def apply_set(images: np.ndarray, distortions: DistortionSet) -> list[np.ndarray]:
    """Replica ``i`` is ``psi_i`` applied to the original input; never chained.

    Raises:
        DistortionError: Wrapping the first failing distortion with its index.
    """
    replicas = []
    for index, spec in enumerate(distortions):
        try:
            replicas.append(apply_distortion(images, spec))
        except ValueError as exc:
            raise DistortionError(index, spec, exc) from exc
    return replicas
