"""Classification metrics over confusion matrices."""

from __future__ import annotations

import numpy as np

from .domain import ConfusionMatrix

METRIC_NAMES = ("accuracy", "mean_recall")


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified samples (trace / total)."""
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    return float(np.trace(cm.counts) / total)


def mean_recall(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class recalls (balanced accuracy).

    Every true class must have at least one sample, otherwise its recall is
    undefined.
    """
    support = cm.counts.sum(axis=1)
    empty = np.nonzero(support == 0)[0]
    if empty.size:
        raise ValueError(f"classes without support: {empty.tolist()}")
    recalls = np.diag(cm.counts) / support
    return float(recalls.mean())


def metric_fn(name: str):
    if name == "accuracy":
        return accuracy
    if name == "mean_recall":
        return mean_recall
    raise ValueError(f"unknown metric {name!r}")
