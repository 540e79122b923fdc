"""Evaluation metrics: F1, weighted F1, RMSE, confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RangeError, ShapeError


def _check_lengths(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError(f"label vectors must be 1-D and equal length, "
                         f"got {y_true.shape} and {y_pred.shape}")
    return y_true, y_pred


def binary_f1(y_true, y_pred, positive=1) -> float:
    """F1 with the shout class as positive; 0 when precision+recall is 0."""
    y_true, y_pred = _check_lengths(y_true, y_pred)
    tp = int(np.sum((y_pred == positive) & (y_true == positive)))
    fp = int(np.sum((y_pred == positive) & (y_true != positive)))
    fn = int(np.sum((y_pred != positive) & (y_true == positive)))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2.0 * tp / (2 * tp + fp + fn)


def weighted_f1(y_true, y_pred, n_classes: int) -> float:
    """Per-class F1 averaged with weights equal to class support."""
    y_true, y_pred = _check_lengths(y_true, y_pred)
    _check_range(y_true, n_classes)
    _check_range(y_pred, n_classes)
    total = y_true.size
    if total == 0:
        raise ShapeError("cannot score empty label vectors")
    score = 0.0
    for c in range(n_classes):
        support = int(np.sum(y_true == c))
        if support == 0:
            continue
        score += support * binary_f1(y_true, y_pred, positive=c)
    return score / total


def _check_range(labels, n_classes):
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise RangeError(f"labels outside 0..{n_classes - 1}")


def rmse(actual, predicted) -> float:
    actual, predicted = _check_lengths(np.asarray(actual, dtype=np.float64),
                                       np.asarray(predicted, dtype=np.float64))
    return float(np.sqrt(np.mean((actual - predicted) ** 2)))


def confusion_matrix(y_true, y_pred, n_classes: int = 4):
    """Counts (rows = true class) and row-normalized percentages.

    Rows with no support get all-zero percentages.
    """
    y_true, y_pred = _check_lengths(y_true, y_pred)
    _check_range(y_true, n_classes)
    _check_range(y_pred, n_classes)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[t, p] += 1
    row_sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        percentages = np.where(row_sums > 0, 100.0 * counts / row_sums, 0.0)
    return counts, percentages


@dataclass
class MetricsReport:
    """Scores for one (task, model, features) cell of the experiment grid."""

    task: str
    arch: str
    features: str
    numeric_mode: str
    seed: int
    per_fold_snr: dict = field(default_factory=dict)   # "fold/snr" -> metric value
    snr_means: dict = field(default_factory=dict)      # snr label -> cross-fold mean
    average: float | None = None                       # mean over the SNR sweep
    confusions: dict = field(default_factory=dict)     # snr label -> counts list (4-class)
    scatter: dict = field(default_factory=dict)        # snr label -> [[actual, predicted]..]
    config_echo: dict = field(default_factory=dict)
    training: list = field(default_factory=list)       # per-fold training log summaries
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "shoutkit.report.v1",
            "task": self.task,
            "arch": self.arch,
            "features": self.features,
            "numeric_mode": self.numeric_mode,
            "seed": self.seed,
            "per_fold_snr": self.per_fold_snr,
            "snr_means": self.snr_means,
            "average": self.average,
            "confusions": self.confusions,
            "scatter": self.scatter,
            "config_echo": self.config_echo,
            "training": self.training,
            "failures": self.failures,
        }


REPORT_REQUIRED_KEYS = {
    "schema": str, "task": str, "arch": str, "features": str,
    "numeric_mode": str, "seed": int, "per_fold_snr": dict, "snr_means": dict,
    "confusions": dict, "scatter": dict, "config_echo": dict,
    "training": list, "failures": list,
}


def validate_report(report: dict) -> None:
    """Check a serialized report against the declared schema."""
    from ..errors import FormatError

    if report.get("schema") != "shoutkit.report.v1":
        raise FormatError(f"unknown report schema {report.get('schema')!r}")
    for key, expected in REPORT_REQUIRED_KEYS.items():
        if key not in report:
            raise FormatError(f"report missing key {key!r}")
        if not isinstance(report[key], expected):
            raise FormatError(f"report key {key!r} should be {expected.__name__}")
    if "average" not in report:
        raise FormatError("report missing key 'average'")
    for label, value in report["snr_means"].items():
        if not isinstance(value, (int, float)):
            raise FormatError(f"snr mean for {label!r} is not numeric")
