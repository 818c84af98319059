"""Multi-label dataset container and per-class statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MultiLabelDataset:
    """Feature grids plus a binary label matrix.

    ``images`` has shape (N, H, W) with values in [0, 1]; ``labels`` has
    shape (N, C) with 0/1 entries. Non-image feature vectors are stored
    as 1 x d grids so every pipeline stage consumes the same container.
    """

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.images.ndim != 3:
            raise ValueError(f"images must be (N, H, W), got shape {self.images.shape}")
        if self.labels.ndim != 2:
            raise ValueError(f"labels must be (N, C), got shape {self.labels.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"image/label count mismatch: {self.images.shape[0]} vs {self.labels.shape[0]}"
            )
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise ValueError("labels must be binary")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ValueError("pixel values must lie in [0, 1]")

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.images[i], self.labels[i]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.images.shape[1] * self.images.shape[2]

    def features(self) -> np.ndarray:
        """Row-major flattened pixel matrix, shape (N, H*W)."""
        return self.images.reshape(len(self), -1)

    def subset(self, indices: np.ndarray) -> "MultiLabelDataset":
        indices = np.asarray(indices)
        return MultiLabelDataset(images=self.images[indices], labels=self.labels[indices])


@dataclass
class ClassStats:
    """Per-class positive/negative counts and positive:negative ratios.

    ``ratio[c]`` is NaN when the class has no positives or no negatives
    (the ratio is undefined for that class, not a global failure).
    """

    n_pos: np.ndarray
    n_neg: np.ndarray
    total: int

    def __post_init__(self):
        self.n_pos = np.asarray(self.n_pos, dtype=np.int64)
        self.n_neg = np.asarray(self.n_neg, dtype=np.int64)
        if self.n_pos.shape != self.n_neg.shape or self.n_pos.ndim != 1:
            raise ValueError("n_pos and n_neg must be 1-D arrays of equal length")
        if np.any(self.n_pos + self.n_neg != self.total):
            raise ValueError("n_pos[c] + n_neg[c] must equal the total sample count")

    @classmethod
    def from_counts(cls, n_pos, total: int) -> "ClassStats":
        n_pos = np.asarray(n_pos, dtype=np.int64)
        return cls(n_pos=n_pos, n_neg=total - n_pos, total=int(total))

    @property
    def num_classes(self) -> int:
        return self.n_pos.size

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.n_pos / self.n_neg.astype(np.float64)
        r[~self.ratio_defined] = np.nan
        return r

    @property
    def ratio_defined(self) -> np.ndarray:
        return (self.n_pos >= 1) & (self.n_neg >= 1)


def compute_class_stats(dataset: MultiLabelDataset) -> ClassStats:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    n_pos = dataset.labels.sum(axis=0).astype(np.int64)
    return ClassStats.from_counts(n_pos, total=len(dataset))


def imbalance_factor(stats: ClassStats) -> float:
    """Most frequent class's positive count over the least frequent's."""
    if np.any(stats.n_pos == 0):
        zero = np.flatnonzero(stats.n_pos == 0).tolist()
        raise ValueError(f"classes with zero positives have no imbalance factor: {zero}")
    return float(stats.n_pos.max() / stats.n_pos.min())


def undersample_epoch(dataset: MultiLabelDataset, budget: int, seed) -> np.ndarray:
    """Pick up to ``budget`` samples per class (as positives), deduplicated.

    Classes with fewer than ``budget`` positives contribute all of them.
    A sample positive for several selected classes appears once. Draws
    are without replacement within a class and fresh per call, so the
    caller passes a per-epoch seed.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(seed)
    chosen: set[int] = set()
    for c in range(dataset.num_classes):
        candidates = np.flatnonzero(dataset.labels[:, c] == 1)
        if candidates.size > budget:
            candidates = rng.choice(candidates, size=budget, replace=False)
        chosen.update(int(i) for i in candidates)
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=len(chosen)))
