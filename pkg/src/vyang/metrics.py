"""Classification metrics for the sarcastic (positive) class, as percentages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


def _prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
    return precision, recall, f1


def compute_metrics(predictions: Sequence[int], labels: Sequence[int]) -> MetricsReport:
    """Accuracy plus positive-class precision/recall/F1, scaled to [0, 100]."""
    if len(predictions) != len(labels):
        raise ValueError(
            f"got {len(predictions)} predictions for {len(labels)} labels"
        )
    if not labels:
        raise ValueError("need at least one prediction/label pair")
    tp = fp = tn = fn = 0
    for pred, label in zip(predictions, labels):
        if pred not in (0, 1) or label not in (0, 1):
            raise ValueError(f"predictions and labels must be 0/1, got ({pred}, {label})")
        if pred == 1 and label == 1:
            tp += 1
        elif pred == 1 and label == 0:
            fp += 1
        elif pred == 0 and label == 0:
            tn += 1
        else:
            fn += 1
    precision, recall, f1 = _prf(tp, fp, fn)
    accuracy = (tp + tn) / len(labels)
    return MetricsReport(
        accuracy=100.0 * accuracy,
        precision=100.0 * precision,
        recall=100.0 * recall,
        f1=100.0 * f1,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def macro_metrics(predictions: Sequence[int], labels: Sequence[int]) -> Tuple[float, float, float]:
    """Macro-averaged precision/recall/F1 over both classes, percentages."""
    report = compute_metrics(predictions, labels)
    pos = _prf(report.tp, report.fp, report.fn)
    # the negative class sees the confusion matrix with roles swapped
    neg = _prf(report.tn, report.fn, report.fp)
    return tuple(100.0 * (a + b) / 2 for a, b in zip(pos, neg))


def aggregate_folds(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Unweighted mean of fold metrics; confusion counts are summed."""
    if not reports:
        raise ValueError("cannot aggregate zero reports")
    k = len(reports)
    return MetricsReport(
        accuracy=sum(r.accuracy for r in reports) / k,
        precision=sum(r.precision for r in reports) / k,
        recall=sum(r.recall for r in reports) / k,
        f1=sum(r.f1 for r in reports) / k,
        tp=sum(r.tp for r in reports),
        fp=sum(r.fp for r in reports),
        tn=sum(r.tn for r in reports),
        fn=sum(r.fn for r in reports),
    )
