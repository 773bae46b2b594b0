"""Classification metrics: accuracy, one-vs-rest F1 variants, ROC AUC."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LabelError, UndefinedAUCError


def _paired(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise DimensionError("pred and truth must be equal-length non-empty vectors")
    return pred, truth


def accuracy(pred, truth) -> float:
    pred, truth = _paired(pred, truth)
    return float(np.mean(pred == truth))


@dataclass(frozen=True)
class F1Scores:
    per_class: np.ndarray
    weighted: float
    macro: float
    binary: float | None  # F1 of class 1 when K == 2


def f1_scores(pred, truth, class_count: int) -> F1Scores:
    """One-vs-rest F1 per class plus support-weighted and macro means.

    A class with zero predicted and zero actual positives gets F1 = 0
    (and weight 0 in the weighted mean).
    """
    pred, truth = _paired(pred, truth)
    labels = np.concatenate([pred, truth])
    if labels.min() < 0 or labels.max() >= class_count:
        raise LabelError(f"labels must lie in [0, {class_count})")
    per_class = np.zeros(class_count)
    support = np.zeros(class_count)
    for cls in range(class_count):
        tp = np.sum((pred == cls) & (truth == cls))
        fp = np.sum((pred == cls) & (truth != cls))
        fn = np.sum((pred != cls) & (truth == cls))
        support[cls] = tp + fn
        denom = 2 * tp + fp + fn
        per_class[cls] = 2 * tp / denom if denom > 0 else 0.0
    weighted = float(per_class @ support / support.sum())
    return F1Scores(
        per_class=per_class,
        weighted=weighted,
        macro=float(per_class.mean()),
        binary=float(per_class[1]) if class_count == 2 else None,
    )


def roc_auc(scores, truth) -> float:
    """Mann-Whitney AUC of positive-class scores, ties given half credit."""
    scores, truth = _paired(np.asarray(scores, dtype=np.float64), truth)
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both a positive and a negative sample")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    mean_rank = (upper - counts + 1 + upper) / 2.0
    ranks = mean_rank[inverse]
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    weighted_f1: float
    macro_f1: float
    n: int
    f1_binary: float | None = None
    auc: float | None = None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "f1_binary": self.f1_binary,
            "auc": self.auc,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            if value is None:
                continue
            lines.append(f"{key} {value:.6g}" if key != "n" else f"n {value}")
        return "\n".join(lines) + "\n"


def compute_report(pred, truth, class_count: int, scores=None) -> MetricReport:
    """Bundle the metrics for one evaluation; scores enable binary AUC."""
    f1 = f1_scores(pred, truth, class_count)
    auc = None
    if scores is not None and class_count == 2:
        auc = roc_auc(scores, truth)
    return MetricReport(
        accuracy=accuracy(pred, truth),
        weighted_f1=f1.weighted,
        macro_f1=f1.macro,
        f1_binary=f1.binary,
        auc=auc,
        n=len(np.asarray(pred)),
    )
