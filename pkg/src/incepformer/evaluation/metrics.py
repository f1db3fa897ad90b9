"""Accuracy, confusion matrices and information transfer rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class AccuracyResult:
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted class
    predictions: np.ndarray

    @property
    def per_class(self) -> np.ndarray:
        """Recall per class; NaN for classes absent from the evaluated set."""
        totals = self.confusion.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, np.diag(self.confusion) / totals, np.nan)


def confusion_matrix(labels, predictions, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def accuracy_from_predictions(labels, predictions, n_classes: int) -> AccuracyResult:
    cm = confusion_matrix(labels, predictions, n_classes)
    total = cm.sum()
    acc = float(np.trace(cm) / total) if total else float("nan")
    return AccuracyResult(acc, cm, np.asarray(predictions, dtype=np.int64))


def itr(p: float, n: int, t: float) -> float:
    """Information transfer rate in bits/min for accuracy ``p`` over ``n`` targets in ``t`` seconds.

    Uses the convention 0 * log 0 = 0 and clamps below-chance values to 0.
    """
    if n < 2:
        raise ConfigError(f"ITR needs at least 2 classes, got {n}")
    if not t > 0:
        raise ConfigError(f"ITR needs a positive selection time, got {t}")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"accuracy must lie in [0, 1], got {p}")
    if p <= 1.0 / n:
        return 0.0
    bits = math.log2(n)
    if p > 0:
        bits += p * math.log2(p)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) / (n - 1))
    return max(0.0, 60.0 / t * bits)
