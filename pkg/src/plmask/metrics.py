"""Multi-label evaluation: per-class precision/recall/F1, exact-match
accuracy, and aggregation over the rarest training classes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data.dataset import ClassStats


def _check_binary_pair(y: np.ndarray, y_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y)
    y_hat = np.asarray(y_hat)
    if y.shape != y_hat.shape or y.ndim != 2:
        raise ValueError(f"need matching 2-D label matrices, got {y.shape} and {y_hat.shape}")
    for name, arr in (("labels", y), ("predictions", y_hat)):
        if np.any((arr != 0) & (arr != 1)):
            raise ValueError(f"{name} must be binary")
    return y.astype(np.int64), y_hat.astype(np.int64)


def per_class_precision_recall(
    y: np.ndarray, y_hat: np.ndarray, zero_division: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class precision TP/(TP+FP) and recall TP/(TP+FN).

    A 0/0 (no predicted positives, or no true positives) resolves to
    ``zero_division``; the default 1.0 treats an empty claim as
    vacuously correct.
    """
    y, y_hat = _check_binary_pair(y, y_hat)
    tp = np.sum((y == 1) & (y_hat == 1), axis=0).astype(np.float64)
    predicted = y_hat.sum(axis=0)
    actual = y.sum(axis=0)
    precision = np.where(predicted > 0, tp / np.maximum(predicted, 1), zero_division)
    recall = np.where(actual > 0, tp / np.maximum(actual, 1), zero_division)
    return precision, recall


def f1_scores(precision: np.ndarray, recall: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-class harmonic mean 2PR/(P+R) (0 when P+R == 0) and its macro mean."""
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    denom = precision + recall
    f1 = np.where(denom > 0, 2.0 * precision * recall / np.maximum(denom, 1e-300), 0.0)
    return f1, float(np.mean(f1))


def exact_match(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Fraction of samples whose full predicted label vector matches."""
    y, y_hat = _check_binary_pair(y, y_hat)
    return float(np.mean(np.all(y == y_hat, axis=1)))


def topk_infrequent(values: np.ndarray, train_stats: ClassStats, k: int) -> float:
    """Mean of a per-class metric over the k classes with fewest training
    positives; ties broken by ascending class index."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != train_stats.num_classes:
        raise ValueError(
            f"metric length {values.size} != class count {train_stats.num_classes}"
        )
    if not 1 <= k <= values.size:
        raise ValueError(f"k must be in [1, {values.size}], got {k}")
    order = np.argsort(train_stats.n_pos, kind="stable")
    return float(np.mean(values[order[:k]]))


@dataclass
class MetricsReport:
    """Per-class and aggregated evaluation results.

    ``topk`` maps K to the recall/F1 means over the K rarest training
    classes; it is empty when training counts were not supplied.
    """

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    exact_match: float
    topk: dict[int, dict[str, float]] = field(default_factory=dict)

    @property
    def macro_precision(self) -> float:
        return float(np.mean(self.precision))

    @property
    def macro_recall(self) -> float:
        return float(np.mean(self.recall))

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1))

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "exact_match": self.exact_match,
            "topk": {str(k): dict(v) for k, v in self.topk.items()},
        }


def evaluate_predictions(
    y: np.ndarray,
    y_hat: np.ndarray,
    train_stats: ClassStats | None = None,
    topk: tuple[int, ...] = (3, 5),
    zero_division: float = 1.0,
) -> MetricsReport:
    """Full report from binary labels and binary predictions."""
    precision, recall = per_class_precision_recall(y, y_hat, zero_division)
    f1, _ = f1_scores(precision, recall)
    views: dict[int, dict[str, float]] = {}
    if train_stats is not None:
        for k in topk:
            if 1 <= k <= train_stats.num_classes:
                views[k] = {
                    "recall": topk_infrequent(recall, train_stats, k),
                    "f1": topk_infrequent(f1, train_stats, k),
                }
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1,
        exact_match=exact_match(y, y_hat),
        topk=views,
    )
