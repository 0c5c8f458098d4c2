"""Ranking and classification metrics for scored edge lists."""

from __future__ import annotations

import numpy as np

from .errors import DataError

__all__ = ["recall_at", "precision_accuracy"]


def recall_at(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of positive edges ranked in the top k by score.

    Ties at the boundary resolve by stable input order: of two equal scores
    the earlier entry ranks higher.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape[0] != labels.shape[0]:
        raise DataError("scores and labels length mismatch")
    if k > scores.shape[0]:
        raise DataError(f"k={k} exceeds number of scored edges {scores.shape[0]}")
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        return 0.0
    if k <= 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    hits = int(np.sum(labels[order[:k]] == 1))
    return hits / n_pos


def precision_accuracy(
    scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5
) -> tuple[float, float]:
    """Binarize at ``threshold`` (>= is positive) and report precision/accuracy.

    Use threshold 0.5 for [0, 1]-calibrated scores and 0.0 for raw logits.
    Precision of an all-negative prediction is defined as 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape[0] == 0:
        raise DataError("cannot evaluate empty score list")
    pred = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    tn = int(np.sum(~pred & ~actual))
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    accuracy = (tp + tn) / scores.shape[0]
    return precision, accuracy
