"""Stochastic per-label loss masks and the adaptive target ratio.

For every class the dataset has a positive:negative label ratio r_c; the
masker enforces a target ratio rbar_c by randomly zeroing the loss of
surplus labels: positives are kept with probability rbar_c / r_c when
r_c > rbar_c, negatives with probability r_c / rbar_c when r_c < rbar_c,
and everything else is kept. The kept labels then exhibit the target
ratio in expectation. Between epochs the target is scaled by
exp(lam * d_c), where d_c is the normalized divergence gap between the
predicted and ground-truth output distributions (see
:mod:`plmask.histograms`): under-predicted classes get a larger ratio
(fewer masked negatives), over-predicted classes a smaller one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data.dataset import ClassStats
from .histograms import DivergenceSummary

RATIO_INIT_MODES = ("dataset", "mean", "min", "max", "constant")


@dataclass(frozen=True)
class RatioState:
    """Per-class target ratio with its epoch index and optional clip bounds."""

    target_ratio: np.ndarray
    epoch: int = 1
    clip_bounds: tuple[float, float] | None = None
    lam: float = 0.01

    def __post_init__(self):
        ratio = np.asarray(self.target_ratio, dtype=np.float64)
        if ratio.ndim != 1 or ratio.size == 0:
            raise ValueError("target_ratio must be a nonempty 1-D array")
        if np.any(~np.isfinite(ratio)) or np.any(ratio <= 0):
            raise ValueError("every target ratio must be finite and > 0")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.clip_bounds is not None:
            low, high = self.clip_bounds
            if not low < high:
                raise ValueError(f"invalid clip bounds {self.clip_bounds}")
        object.__setattr__(self, "target_ratio", ratio)

    @property
    def num_classes(self) -> int:
        return self.target_ratio.size


def _clip(ratio: np.ndarray, bounds: tuple[float, float] | None) -> np.ndarray:
    if bounds is None:
        return ratio
    return np.clip(ratio, bounds[0], bounds[1])


def init_ratio_state(
    stats: ClassStats,
    mode: str = "dataset",
    lam: float = 0.01,
    clip_bounds: tuple[float, float] | None = None,
    constant_value: float | None = None,
) -> RatioState:
    """Initial target ratio: the dataset's own ratios, or a broadcast
    of their mean/min/max, or a constant."""
    if mode not in RATIO_INIT_MODES:
        raise ValueError(f"unknown ratio init mode {mode!r}; expected one of {RATIO_INIT_MODES}")
    r = stats.ratio
    if mode == "constant":
        if constant_value is None or constant_value <= 0:
            raise ValueError(f"constant ratio init needs a positive value, got {constant_value}")
        target = np.full(stats.num_classes, float(constant_value))
    else:
        if np.any(~stats.ratio_defined):
            bad = np.flatnonzero(~stats.ratio_defined).tolist()
            raise ValueError(f"ratio undefined (no positives or no negatives) for classes {bad}")
        if mode == "dataset":
            target = r.copy()
        elif mode == "mean":
            target = np.full(stats.num_classes, float(np.mean(r)))
        elif mode == "min":
            target = np.full(stats.num_classes, float(np.min(r)))
        else:
            target = np.full(stats.num_classes, float(np.max(r)))
    return RatioState(
        target_ratio=_clip(target, clip_bounds),
        epoch=1,
        clip_bounds=clip_bounds,
        lam=lam,
    )


def generate_masks(
    labels: np.ndarray, stats: ClassStats, state: RatioState, seed
) -> np.ndarray:
    """Draw the (N x C) binary loss-mask matrix for one epoch.

    Independent per (sample, class): keep probability rbar_c / r_c for
    positive labels of classes above target, r_c / rbar_c for negative
    labels of classes below target, 1 otherwise. Deterministic per seed.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("labels must be 2-D (samples x classes)")
    if labels.shape[1] != state.num_classes or stats.num_classes != state.num_classes:
        raise ValueError(
            f"class count mismatch: labels {labels.shape[1]}, stats {stats.num_classes}, "
            f"state {state.num_classes}"
        )
    if np.any(~stats.ratio_defined):
        bad = np.flatnonzero(~stats.ratio_defined).tolist()
        raise ValueError(f"ratio undefined for classes {bad}; cannot derive keep probabilities")
    r = stats.ratio
    rbar = state.target_ratio
    keep_if_pos = np.where(r > rbar, rbar / r, 1.0)
    keep_if_neg = np.where(r < rbar, r / rbar, 1.0)
    keep_prob = np.where(labels == 1, keep_if_pos, keep_if_neg)
    draws = np.random.default_rng(seed).random(labels.shape)
    return (draws < keep_prob).astype(np.uint8)


def update_ratios(state: RatioState, summary: DivergenceSummary) -> RatioState:
    """Scale each target ratio by exp(lam * d_c), clip, advance the epoch.

    d_c == 0 leaves the class's ratio bit-identical (exp(0) == 1).
    """
    d = summary.d_combined
    if d.size != state.num_classes:
        raise ValueError(f"class count mismatch: summary {d.size}, state {state.num_classes}")
    if np.any(~np.isfinite(d)):
        bad = np.flatnonzero(~np.isfinite(d)).tolist()
        raise ValueError(f"non-finite divergence signal for classes {bad}")
    target = state.target_ratio * np.exp(state.lam * d)
    return replace(state, target_ratio=_clip(target, state.clip_bounds), epoch=state.epoch + 1)
