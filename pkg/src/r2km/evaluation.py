"""Classification and regression metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError


def confusion(true_labels, predicted_labels, n_classes):
    """Counts with rows = true class, columns = predicted class."""
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise DimensionError(f"{t.size} true labels vs {p.size} predictions")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= n_classes):
        raise DataError(f"label outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass(frozen=True)
class ClassificationMetrics:
    per_class: tuple  # NaN where the class has no true samples
    oa: float
    aa: float
    kappa: float  # NaN when chance agreement is 1

    def as_dict(self):
        return {
            "per_class": [None if np.isnan(v) else v for v in self.per_class],
            "oa": self.oa,
            "aa": self.aa,
            "kappa": None if np.isnan(self.kappa) else self.kappa,
        }


def classification_metrics(cm):
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total <= 0:
        raise DataError("confusion matrix is empty")
    rows = cm.sum(axis=1)
    cols = cm.sum(axis=0)
    diag = np.diag(cm)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(rows > 0, diag / rows, np.nan)
    oa = diag.sum() / total
    aa = float(np.nanmean(per_class))
    p_e = float(rows @ cols) / total**2
    kappa = np.nan if p_e == 1.0 else (oa - p_e) / (1.0 - p_e)
    return ClassificationMetrics(
        tuple(float(v) for v in per_class), float(oa), aa, float(kappa)
    )


@dataclass(frozen=True)
class RegressionErrors:
    """``pos_error``/``neg_error`` are mean over- and under-prediction.

    These two are a working definition: mean of the positive residuals
    ``pred - true`` and mean magnitude of the negative ones (0 when absent).
    """

    rmse: float
    mae: float
    pos_error: float
    neg_error: float

    def as_dict(self):
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "pos_error": self.pos_error,
            "neg_error": self.neg_error,
        }


def regression_metrics(y_true, y_pred):
    t = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if t.shape != p.shape:
        raise DimensionError(f"{t.size} targets vs {p.size} predictions")
    if t.size == 0:
        raise DataError("no samples to score")
    r = p - t
    pos = r[r > 0]
    neg = r[r < 0]
    # scale before squaring so tiny residuals do not underflow to zero
    scale = float(np.max(np.abs(r)))
    rmse = scale * float(np.sqrt(np.mean((r / scale) ** 2))) if scale > 0 else 0.0
    return RegressionErrors(
        rmse=rmse,
        mae=float(np.mean(np.abs(r))),
        pos_error=float(pos.mean()) if pos.size else 0.0,
        neg_error=float(-neg.mean()) if neg.size else 0.0,
    )
