"""Binary classification metrics: accuracy, F1, rank-statistic AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Metrics:
    acc: float
    f1: float
    auc: float | None
    f1_defined: bool = True
    auc_defined: bool = True

    def as_dict(self) -> dict:
        return {
            "acc": self.acc,
            "f1": self.f1,
            "auc": self.auc,
            "f1_defined": self.f1_defined,
            "auc_defined": self.auc_defined,
        }


def _tie_averaged_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    start = 0
    while start < values.size:
        stop = start
        while stop + 1 < values.size and sorted_vals[stop + 1] == sorted_vals[start]:
            stop += 1
        ranks[order[start : stop + 1]] = 0.5 * (start + stop) + 1.0
        start = stop + 1
    return ranks


def compute_metrics(scores: np.ndarray, labels: np.ndarray) -> Metrics:
    """Metrics for positive-class probabilities against binary labels.

    Accuracy thresholds at 0.5; F1 is that of the positive class and is
    flagged undefined (value 0) when it has no support; AUC is the
    Mann-Whitney rank statistic with tied scores averaged, flagged undefined
    when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValueError("scores and labels must be matching vectors")
    if np.any((s < 0) | (s > 1)):
        raise ValueError("scores must lie in [0, 1]")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be binary")

    predicted = s >= 0.5
    actual = y == 1
    acc = float(np.mean(predicted == actual))

    true_pos = int(np.sum(predicted & actual))
    pred_pos = int(np.sum(predicted))
    real_pos = int(np.sum(actual))
    if pred_pos == 0 or real_pos == 0 or true_pos == 0:
        f1 = 0.0
        f1_defined = pred_pos > 0 and real_pos > 0
    else:
        precision = true_pos / pred_pos
        recall = true_pos / real_pos
        f1 = 2.0 * precision * recall / (precision + recall)
        f1_defined = True

    num_pos = real_pos
    num_neg = y.size - real_pos
    if num_pos == 0 or num_neg == 0:
        return Metrics(acc=acc, f1=f1, auc=None, f1_defined=f1_defined, auc_defined=False)
    ranks = _tie_averaged_ranks(s)
    rank_sum = float(ranks[actual].sum())
    auc = (rank_sum - num_pos * (num_pos + 1) / 2.0) / (num_pos * num_neg)
    return Metrics(acc=acc, f1=f1, auc=auc, f1_defined=f1_defined)
