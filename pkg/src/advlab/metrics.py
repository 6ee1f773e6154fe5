"""Classification metrics: confusion matrices and evaluation reports."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelError


@dataclass
class EvalReport:
    """Accuracy, mean loss, macro precision/recall, and the confusion matrix.

    ``confusion[i, j]`` counts samples of true class ``i`` predicted as ``j``.
    ``mean_loss`` is None for models that expose no probabilistic output
    (e.g. winner-take-all crossbar readout).
    """

    accuracy: float
    mean_loss: float | None
    precision: float
    recall: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mean_loss": self.mean_loss,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LabelError(f"label arrays differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size and (y_true.min() < 0 or y_true.max() >= n_classes):
        raise LabelError(f"true labels outside [0, {n_classes})")
    if y_pred.size and (y_pred.min() < 0 or y_pred.max() >= n_classes):
        raise LabelError(f"predicted labels outside [0, {n_classes})")
    flat = y_true * n_classes + y_pred
    counts = np.bincount(flat, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes)


def macro_precision_recall(confusion: np.ndarray) -> tuple[float, float]:
    """Macro-averaged precision and recall; empty rows/columns contribute 0."""
    diag = np.diag(confusion).astype(float)
    col = confusion.sum(axis=0).astype(float)
    row = confusion.sum(axis=1).astype(float)
    precision = np.where(col > 0, diag / np.maximum(col, 1), 0.0)
    recall = np.where(row > 0, diag / np.maximum(row, 1), 0.0)
    return float(precision.mean()), float(recall.mean())


def report_from_predictions(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    n_classes: int,
    mean_loss: float | None = None,
) -> EvalReport:
    conf = confusion_matrix(y_true, y_pred, n_classes)
    total = conf.sum()
    accuracy = float(np.trace(conf) / total) if total else 0.0
    precision, recall = macro_precision_recall(conf)
    return EvalReport(accuracy, mean_loss, precision, recall, conf)
