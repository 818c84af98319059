"""Binned output-probability distributions and their KL divergences.

Per class, the predicted probabilities on positive samples and on
negative samples are binned into tau equal-width bins over [0, 1] and
normalized into discrete distributions. The matching ground-truth
distributions are point masses: all mass in the last bin for positive
labels, all mass in the first bin for negative labels. The gap between
predicted and ground-truth distributions (one KL value per side, then
normalized across classes) is the signal that drives the per-class
target-ratio update in :mod:`plmask.masking`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TAU = 10
DEFAULT_KL_EPS = 1e-6
SIGMA_DEGENERATE = 1e-12


@dataclass(frozen=True)
class ProbabilityHistogram:
    """A tau-bin discrete distribution of probabilities in [0, 1].

    ``count`` is the number of underlying samples; a histogram with
    count == 0 marks an empty probability set (its mass is all zeros
    and it takes no part in divergence statistics).
    """

    tau: int
    mass: np.ndarray
    count: int

    def __post_init__(self):
        if self.tau < 2:
            raise ValueError(f"tau must be >= 2, got {self.tau}")
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (self.tau,):
            raise ValueError(f"mass must have shape ({self.tau},), got {mass.shape}")
        if np.any(mass < 0):
            raise ValueError("histogram mass must be nonnegative")
        if self.count > 0 and abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram mass must sum to 1, got {mass.sum()!r}")
        object.__setattr__(self, "mass", mass)

    @property
    def empty(self) -> bool:
        return self.count == 0


def bin_index(probs: np.ndarray, tau: int) -> np.ndarray:
    """Bin k covers [k/tau, (k+1)/tau); the final bin is closed at 1.0."""
    idx = np.floor(np.asarray(probs, dtype=np.float64) * tau).astype(np.int64)
    return np.clip(idx, 0, tau - 1)


def histogram_from_probs(probs: np.ndarray, tau: int) -> ProbabilityHistogram:
    """Normalized tau-bin histogram of a probability set (may be empty)."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size == 0:
        return ProbabilityHistogram(tau=tau, mass=np.zeros(tau), count=0)
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    counts = np.bincount(bin_index(probs, tau), minlength=tau)
    return ProbabilityHistogram(tau=tau, mass=counts / probs.size, count=int(probs.size))


def point_mass(tau: int, bin_idx: int, count: int) -> ProbabilityHistogram:
    if count == 0:
        return ProbabilityHistogram(tau=tau, mass=np.zeros(tau), count=0)
    mass = np.zeros(tau)
    mass[bin_idx] = 1.0
    return ProbabilityHistogram(tau=tau, mass=mass, count=count)


@dataclass(frozen=True)
class ClassDistributions:
    """The four per-class distributions: ground truth and predictions,
    each split by positive/negative label."""

    pos_true: ProbabilityHistogram
    pos_pred: ProbabilityHistogram
    neg_true: ProbabilityHistogram
    neg_pred: ProbabilityHistogram


def build_histograms(
    labels: np.ndarray, probs: np.ndarray, tau: int = DEFAULT_TAU
) -> list[ClassDistributions]:
    """Per-class distribution quadruple over a (N x C) label/probability pair.

    For class c the predicted positive set holds the predicted
    probabilities of samples labeled 1 (negative set: labeled 0); the
    ground-truth sides are point masses in the last and first bin. A
    class with no positives (or no negatives) gets empty histograms on
    that side rather than an error.
    """
    labels = np.asarray(labels)
    probs = np.asarray(probs, dtype=np.float64)
    if labels.shape != probs.shape:
        raise ValueError(f"shape mismatch: labels {labels.shape}, probs {probs.shape}")
    if labels.ndim != 2:
        raise ValueError("labels/probs must be 2-D (samples x classes)")
    out = []
    for c in range(labels.shape[1]):
        pos = labels[:, c] == 1
        pos_probs = probs[pos, c]
        neg_probs = probs[~pos, c]
        out.append(
            ClassDistributions(
                pos_true=point_mass(tau, tau - 1, count=pos_probs.size),
                pos_pred=histogram_from_probs(pos_probs, tau),
                neg_true=point_mass(tau, 0, count=neg_probs.size),
                neg_pred=histogram_from_probs(neg_probs, tau),
            )
        )
    return out


def kl_divergence(
    p_hat: ProbabilityHistogram,
    p: ProbabilityHistogram,
    eps: float = DEFAULT_KL_EPS,
) -> float:
    """KL(p_hat || p) after additive-eps smoothing of both histograms.

    Smoothing keeps the divergence finite against point-mass
    ground-truth distributions; identical inputs still give exactly 0
    because smoothing is applied to both sides.
    """
    if p_hat.tau != p.tau:
        raise ValueError(f"bin-count mismatch: {p_hat.tau} vs {p.tau}")
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    a = (p_hat.mass + eps) / (p_hat.mass.sum() + p_hat.tau * eps)
    b = (p.mass + eps) / (p.mass.sum() + p.tau * eps)
    return float(np.sum(a * (np.log(a) - np.log(b))))


@dataclass
class DivergenceSummary:
    """Per-class divergences and their across-class normalization.

    ``d_pos``/``d_neg`` hold NaN for classes whose probability set was
    empty on that side; those classes are excluded from the mean/std and
    get ``d_combined`` 0 (their target ratio is frozen for the epoch).
    """

    d_pos: np.ndarray
    d_neg: np.ndarray
    d_pos_norm: np.ndarray = field(init=False)
    d_neg_norm: np.ndarray = field(init=False)
    d_combined: np.ndarray = field(init=False)
    mu_pos: float = field(init=False)
    sigma_pos: float = field(init=False)
    mu_neg: float = field(init=False)
    sigma_neg: float = field(init=False)

    def __post_init__(self):
        self.d_pos = np.asarray(self.d_pos, dtype=np.float64)
        self.d_neg = np.asarray(self.d_neg, dtype=np.float64)
        if self.d_pos.shape != self.d_neg.shape or self.d_pos.ndim != 1:
            raise ValueError("d_pos and d_neg must be 1-D arrays of equal length")
        if self.d_pos.size == 0:
            raise ValueError("need at least one class")
        self.d_pos_norm, self.mu_pos, self.sigma_pos = _normalize_side(self.d_pos)
        self.d_neg_norm, self.mu_neg, self.sigma_neg = _normalize_side(self.d_neg)
        combined = self.d_pos_norm - self.d_neg_norm
        undefined = np.isnan(self.d_pos) | np.isnan(self.d_neg)
        combined[undefined] = 0.0
        self.d_combined = combined


def _normalize_side(d: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Center/scale one side by its across-class mean and population std.

    NaN entries (empty probability sets) are excluded from the
    statistics and normalized to 0; a degenerate std (all defined
    values equal, or a single class) also yields all zeros.
    """
    valid = ~np.isnan(d)
    norm = np.zeros_like(d)
    if not valid.any():
        return norm, float("nan"), float("nan")
    mu = float(np.mean(d[valid]))
    sigma = float(np.std(d[valid]))
    if sigma >= SIGMA_DEGENERATE:
        norm[valid] = (d[valid] - mu) / sigma
    return norm, mu, sigma


def normalize_divergences(d_pos: np.ndarray, d_neg: np.ndarray) -> DivergenceSummary:
    """Normalize per-class divergences and combine them into the
    per-class update signal d_combined = norm(d_pos) - norm(d_neg)."""
    return DivergenceSummary(d_pos=d_pos, d_neg=d_neg)


def divergences_from_histograms(
    dists: list[ClassDistributions], eps: float = DEFAULT_KL_EPS
) -> DivergenceSummary:
    """KL of predicted-vs-truth per class and side, then normalization.

    Sides with an empty probability set contribute NaN (excluded from
    the normalization statistics).
    """
    d_pos = np.array(
        [
            np.nan if d.pos_pred.empty else kl_divergence(d.pos_pred, d.pos_true, eps)
            for d in dists
        ]
    )
    d_neg = np.array(
        [
            np.nan if d.neg_pred.empty else kl_divergence(d.neg_pred, d.neg_true, eps)
            for d in dists
        ]
    )
    return normalize_divergences(d_pos, d_neg)
