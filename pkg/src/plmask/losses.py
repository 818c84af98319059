"""Per-label losses and the masked, class-weighted batch reduction.

Every loss here operates on per-class sigmoid probabilities of a
multi-label classifier. Probabilities are clamped away from {0, 1}
before any logarithm so losses and gradients stay finite.
"""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-7
PROB_CEIL = 1.0 - 1e-7

LOSS_KINDS = ("bce", "focal")


def clip_probs(p: np.ndarray) -> np.ndarray:
    """Clamp probabilities into [PROB_FLOOR, PROB_CEIL]."""
    return np.clip(p, PROB_FLOOR, PROB_CEIL)


def bce(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Elementwise binary cross-entropy -[y log p + (1-y) log(1-p)].

    ``p`` is clamped internally; ``y`` must be 0/1.
    """
    p = clip_probs(np.asarray(p, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def focal(y: np.ndarray, p: np.ndarray, gamma: float = 2.0) -> np.ndarray:
    """Elementwise binary focal loss.

    -[y (1-p)^gamma log p + (1-y) p^gamma log(1-p)]; reduces to ``bce``
    at gamma == 0. Down-weights well-classified labels.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    p = clip_probs(np.asarray(p, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    return -(
        y * (1.0 - p) ** gamma * np.log(p)
        + (1.0 - y) * p**gamma * np.log(1.0 - p)
    )


def pointwise_loss(y: np.ndarray, p: np.ndarray, kind: str, gamma: float = 2.0) -> np.ndarray:
    if kind == "bce":
        return bce(y, p)
    if kind == "focal":
        return focal(y, p, gamma)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def loss_grad_wrt_prob(y: np.ndarray, p: np.ndarray, kind: str, gamma: float = 2.0) -> np.ndarray:
    """d loss / d p, evaluated at the clamped probability.

    Entries where ``p`` falls outside the clamp window get the gradient
    of the clamped composition, which is handled by the caller via the
    clamp indicator (the loss is flat in the clamped region).
    """
    p = clip_probs(np.asarray(p, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if kind == "bce":
        return -y / p + (1.0 - y) / (1.0 - p)
    if kind == "focal":
        if gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {gamma}")
        if gamma == 0.0:
            return -y / p + (1.0 - y) / (1.0 - p)
        one_m_p = 1.0 - p
        pos = gamma * one_m_p ** (gamma - 1.0) * np.log(p) - one_m_p**gamma / p
        neg = -gamma * p ** (gamma - 1.0) * np.log(one_m_p) + p**gamma / one_m_p
        return y * pos + (1.0 - y) * neg
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def inverse_count_weights(n_pos: np.ndarray) -> np.ndarray:
    """Class weights proportional to 1/n_c, normalized so sum(w) == C."""
    n = np.asarray(n_pos, dtype=np.float64)
    if np.any(n < 1):
        raise ValueError("every class needs at least one positive sample")
    w = 1.0 / n
    return w * (w.size / w.sum())


def effective_number_weights(n_pos: np.ndarray, beta: float = 0.9999) -> np.ndarray:
    """Class weights proportional to (1-beta)/(1-beta^n_c), sum(w) == C.

    beta == 0 degenerates to uniform weights; beta -> 1 approaches
    inverse-count weighting.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must be in [0, 1), got {beta}")
    n = np.asarray(n_pos, dtype=np.float64)
    if np.any(n < 1):
        raise ValueError("every class needs at least one positive sample")
    w = (1.0 - beta) / (1.0 - beta**n) if beta > 0.0 else np.ones_like(n)
    return w * (w.size / w.sum())


def class_weights(n_pos: np.ndarray, scheme: str, beta: float = 0.9999) -> np.ndarray:
    """Dispatch on weighting scheme: none | effective | inverse."""
    n = np.asarray(n_pos, dtype=np.float64)
    if scheme == "none":
        return np.ones(n.size, dtype=np.float64)
    if scheme == "effective":
        return effective_number_weights(n, beta)
    if scheme == "inverse":
        return inverse_count_weights(n)
    raise ValueError(f"unknown weighting scheme {scheme!r}")


def masked_weighted_loss(
    labels: np.ndarray,
    probs: np.ndarray,
    masks: np.ndarray,
    weights: np.ndarray | None = None,
    kind: str = "bce",
    gamma: float = 2.0,
) -> float:
    """Mean over the batch of sum_j w_j * g_j * loss(y_j, p_j).

    With all-ones masks and uniform weights this is exactly the plain
    summed-per-class loss averaged over the batch.
    """
    labels = np.asarray(labels)
    probs = np.asarray(probs)
    masks = np.asarray(masks)
    if labels.shape != probs.shape or labels.shape != masks.shape:
        raise ValueError(
            f"shape mismatch: labels {labels.shape}, probs {probs.shape}, masks {masks.shape}"
        )
    per_label = pointwise_loss(labels, probs, kind, gamma)
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (labels.shape[1],):
            raise ValueError(
                f"weights must have shape ({labels.shape[1]},), got {weights.shape}"
            )
        per_label = per_label * weights
    return float(np.mean(np.sum(per_label * masks, axis=1)))
