"""Gradient-based adversarial attacks: FGSM, DeepFool and L2 Carlini-Wagner.

Each attack returns an :class:`AttackResult` whose stored pair satisfies
``adversarial == clip(image + perturbation, 0, 1)`` bit-exactly.
"""

from __future__ import annotations

import numpy as np

from src.core.network import Network
from src.core.numerics import AdamState
from src.models.attack_result import AttackConfig, AttackKind, AttackResult
from src.utils.constants import (
    CW_ABORT_EARLY_CHECKS,
    CW_ABORT_EARLY_TOLERANCE,
    CW_CONST_UPPER_BOUND,
    CW_TANH_SHRINK,
)
from src.utils.logger import get_logger

logger = get_logger("core.attacks")


def _package(
    network: Network,
    image: np.ndarray,
    candidate: np.ndarray,
    source_index: int,
    iterations: int,
    original_prediction: int,
) -> AttackResult:
    """Clip a candidate into the box and derive the stored ``(x', eta)`` pair."""
    x = image.astype(np.float32)
    first = np.clip(candidate.astype(np.float32), 0.0, 1.0)
    perturbation = first - x
    adversarial = np.clip(x + perturbation, 0.0, 1.0)
    adversarial_prediction = int(np.argmax(network.predict(adversarial)))
    return AttackResult(
        adversarial=adversarial,
        perturbation=perturbation,
        source_index=source_index,
        success=adversarial_prediction != original_prediction,
        iterations=iterations,
        l2_norm=float(np.linalg.norm(perturbation.astype(np.float64))),
        original_prediction=original_prediction,
        adversarial_prediction=adversarial_prediction,
    )


# ------------------------------------------------------------------
# FGSM
# ------------------------------------------------------------------


def fgsm_batch(
    network: Network, images: np.ndarray, labels: np.ndarray, epsilon: float
) -> np.ndarray:
    """One signed-gradient step per image, clipped into ``[0, 1]``."""
    grads = network.input_gradient_batch(images, labels)
    stepped = images + np.float32(epsilon) * np.sign(grads).astype(images.dtype)
    return np.clip(stepped, 0.0, 1.0).astype(images.dtype)


def fgsm(
    network: Network,
    image: np.ndarray,
    label: int | None,
    epsilon: float,
    source_index: int = -1,
) -> AttackResult:
    """``x' = clip(x + epsilon * sign(grad_x L(x, label)))``.

    ``label`` falls back to the model's own prediction when None.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    original = int(np.argmax(network.predict(image)))
    target = original if label is None else int(label)
    grad = network.input_gradient(image, target)
    step = np.float32(epsilon) * np.sign(grad).astype(np.float32)
    return _package(network, image, image.astype(np.float32) + step, source_index, 1, original)


# ------------------------------------------------------------------
# DeepFool
# ------------------------------------------------------------------


def deepfool(
    network: Network,
    image: np.ndarray,
    config: AttackConfig,
    label: int | None = None,
    source_index: int = -1,
) -> AttackResult:
    """Multiclass DeepFool.

    Each step linearizes the logit differences to every other class at the
    current point and moves to the nearest linearized boundary. The total
    perturbation is scaled by ``1 + overshoot``. If ``label`` is given and the
    model already disagrees with it, nothing is done.
    """
    x0 = image.astype(np.float64)
    original = int(np.argmax(network.predict(image)))
    if label is not None and original != int(label):
        return _package(network, image, image, source_index, 0, original)

    scale = 1.0 + config.overshoot
    r_total = np.zeros_like(x0)
    point = x0
    iterations = 0
    for _ in range(config.max_iterations):
        logits, jacobian = network.logit_jacobian(point)
        if int(np.argmax(logits)) != original:
            break
        best_distance = np.inf
        best_step: np.ndarray | None = None
        for k in range(network.n_classes):
            if k == original:
                continue
            w_k = (jacobian[k] - jacobian[original]).astype(np.float64)
            f_k = float(logits[k] - logits[original])
            norm = float(np.linalg.norm(w_k))
            if norm == 0.0:
                continue
            distance = abs(f_k) / norm
            if distance < best_distance:
                best_distance = distance
                best_step = distance * w_k / norm
        if best_step is None:
            logger.debug("DeepFool: flat logits at sample %d, stopping", source_index)
            break
        r_total = r_total + best_step
        point = np.clip(x0 + scale * r_total, 0.0, 1.0)
        iterations += 1

    return _package(network, image, x0 + scale * r_total, source_index, iterations, original)


# ------------------------------------------------------------------
# Carlini-Wagner L2
# ------------------------------------------------------------------


def carlini_wagner(
    network: Network,
    image: np.ndarray,
    label: int | None,
    config: AttackConfig,
    source_index: int = -1,
) -> AttackResult:
    """L2 C&W with the tanh box parameterization and a binary search over ``c``.

    Minimizes ``||x' - x||^2 + c * max(Z_t(x') - max_{j != t} Z_j(x') + kappa', 0)``
    with Adam over ``w``, where ``x' = (tanh(w) + 1) / 2`` and ``kappa'`` is
    ``config.logit_kappa``. A point counts as successful when its argmax is
    not ``t`` and its margin is at most ``-kappa'``. Returns the successful
    point of smallest L2, or the lowest-margin attempt when none succeeded.

    With ``config.abort_early`` the search over one ``c`` stops once the loss
    has not fallen by a relative ``1 - CW_ABORT_EARLY_TOLERANCE`` since the
    previous of ``CW_ABORT_EARLY_CHECKS`` evenly spaced checks.
    """
    x = image.astype(np.float64)
    original = int(np.argmax(network.predict(image)))
    true_class = original if label is None else int(label)
    kappa = config.logit_kappa
    w_start = np.arctanh((2.0 * x - 1.0) * CW_TANH_SHRINK)

    lower, upper = 0.0, CW_CONST_UPPER_BOUND
    const = config.initial_const
    best_l2 = np.inf
    best_point: np.ndarray | None = None
    fallback_margin = np.inf
    fallback_point = x
    iterations = 0
    check_every = max(1, config.max_iterations // CW_ABORT_EARLY_CHECKS)

    for search_step in range(config.binary_search_steps):
        w = w_start.copy()
        adam = AdamState(learning_rate=config.learning_rate)
        succeeded = False
        previous_loss = np.inf
        for step in range(config.max_iterations + 1):
            tanh_w = np.tanh(w)
            candidate = (tanh_w + 1.0) / 2.0
            logits, other, margin_grad = network.margin_gradient(candidate, true_class)
            margin = float(logits[true_class] - logits[other])
            if int(np.argmax(logits)) != true_class and margin <= -kappa:
                succeeded = True
                l2 = float(np.linalg.norm(candidate - x))
                if l2 < best_l2:
                    best_l2, best_point = l2, candidate
            elif margin < fallback_margin:
                fallback_margin, fallback_point = margin, candidate
            if config.abort_early and step > 0 and step % check_every == 0:
                loss = float(np.sum((candidate - x) ** 2)) + const * max(margin + kappa, 0.0)
                if loss > previous_loss * CW_ABORT_EARLY_TOLERANCE:
                    break
                previous_loss = loss
            if step == config.max_iterations:
                break
            grad = 2.0 * (candidate - x)
            if margin + kappa > 0:
                grad = grad + const * margin_grad.astype(np.float64)
            w = adam.step(w, grad * (1.0 - tanh_w**2) / 2.0)
            iterations += 1

        if succeeded:
            upper = min(upper, const)
            const = (lower + upper) / 2.0
        else:
            lower = max(lower, const)
            const = const * 10.0 if upper >= CW_CONST_UPPER_BOUND else (lower + upper) / 2.0
        logger.debug(
            "C&W sample %d step %d: success=%s next c=%.4g best L2=%.4g",
            source_index,
            search_step,
            succeeded,
            const,
            best_l2,
        )

    chosen = best_point if best_point is not None else fallback_point
    return _package(network, image, chosen, source_index, iterations, original)


def run_attack(
    network: Network,
    image: np.ndarray,
    label: int,
    config: AttackConfig,
    source_index: int = -1,
) -> AttackResult:
    """Dispatch on ``config.kind``."""
    if config.kind is AttackKind.FGSM:
        return fgsm(network, image, label, config.epsilon, source_index)
    if config.kind is AttackKind.DEEPFOOL:
        return deepfool(network, image, config, label, source_index)
    return carlini_wagner(network, image, label, config, source_index)
