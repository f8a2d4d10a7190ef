"""Image- and pixel-level anomaly detection metrics with run aggregation.

Rank metrics: ROC AUC via the rank-sum statistic (ties count half), which
equals the pairwise win-fraction definition exactly; PR AUC as average
precision with step interpolation (no trapezoids), the safer choice under
heavy class imbalance. Thresholded metrics use the F1-optimal threshold,
swept over the distinct observed scores with ties broken toward the
largest threshold. Precision and recall are defined as 0 when their
denominators vanish.

Pixel-level metrics pool every pixel of every test image into one scored
set (so the result is invariant to how pixels are partitioned into
images). Multi-run aggregation reports mean and sample standard deviation
per metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from .core import MetricUndefinedError, ValidationError
from .models import AnomalyMap

__all__ = [
    "ScoredSet",
    "MetricsReport",
    "RunAggregate",
    "ThresholdResult",
    "PixelMetrics",
    "roc_auc",
    "pr_auc",
    "f1_opt_threshold",
    "classification_metrics",
    "pixel_metrics",
    "aggregate_runs",
]

METRIC_FIELDS = (
    "accuracy",
    "precision",
    "recall",
    "f1",
    "roc_auc",
    "pr_auc",
    "pixel_auroc",
    "pixel_f1",
)


@dataclass(frozen=True)
class ScoredSet:
    """Aligned anomaly scores and binary labels (1 = anomalous)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        labels = np.asarray(self.labels).ravel().astype(np.int64)
        if scores.size != labels.size:
            raise ValidationError(
                f"scores ({scores.size}) and labels ({labels.size}) differ in length"
            )
        if scores.size == 0:
            raise ValidationError("empty scored set")
        if not np.isfinite(scores).all():
            raise ValidationError("scores contain non-finite values")
        if not np.isin(labels, (0, 1)).all():
            raise ValidationError("labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return int(self.labels.size - self.labels.sum())


@dataclass(frozen=True)
class MetricsReport:
    """One run's metric values. Pixel metrics stay None for image-only runs."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    threshold: float
    roc_auc: float | None = None
    pr_auc: float | None = None
    pixel_auroc: float | None = None
    pixel_f1: float | None = None

    def as_dict(self) -> dict[str, float]:
        out = {}
        for name in METRIC_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = float(value)
        return out


@dataclass(frozen=True)
class RunAggregate:
    """Per-metric mean and sample std (ddof=1; 0 for a single run)."""

    mean: dict[str, float]
    std: dict[str, float]
    runs: int


class ThresholdResult(NamedTuple):
    threshold: float
    f1: float


class PixelMetrics(NamedTuple):
    pixel_auroc: float
    pixel_f1: float
    threshold: float


def roc_auc(s: ScoredSet) -> float:
    """Area under the ROC curve via rank statistics.

    Equals the pairwise definition exactly: the fraction of
    (anomalous, normal) pairs where the anomalous score is higher, ties
    counting one half. Undefined when only one class is present.
    """
    p, n = s.n_positive, s.n_negative
    if p == 0 or n == 0:
        raise MetricUndefinedError(
            f"roc_auc undefined: need both classes (positives={p}, negatives={n})"
        )
    ranks = rankdata(s.scores, method="average")
    wins = ranks[s.labels == 1].sum() - p * (p + 1) / 2
    return wins / (p * n)


def _descending_groups(s: ScoredSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct thresholds (descending) with cumulative TP and prediction
    counts when predicting score >= threshold."""
    order = np.argsort(-s.scores, kind="stable")
    sorted_scores = s.scores[order]
    sorted_labels = s.labels[order]
    # last index of each tie group = cumulative counts at that threshold
    boundary = np.flatnonzero(np.diff(sorted_scores) != 0.0)
    ends = np.append(boundary, sorted_scores.size - 1)
    tp = np.cumsum(sorted_labels)[ends]
    npred = ends + 1
    return sorted_scores[ends], tp.astype(np.float64), npred.astype(np.float64)


def pr_auc(s: ScoredSet) -> float:
    """Average precision with step interpolation, ties grouped.

    AP = sum over descending distinct thresholds of (R_k - R_{k-1}) * P_k.
    Undefined without at least one positive.
    """
    p = s.n_positive
    if p == 0:
        raise MetricUndefinedError("pr_auc undefined: no positive samples")
    _, tp, npred = _descending_groups(s)
    precision = tp / npred
    recall = tp / p
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - prev_recall) * precision).sum())


def f1_opt_threshold(s: ScoredSet) -> ThresholdResult:
    """The threshold (among distinct scores) maximizing F1.

    Prediction is score >= threshold; ties in F1 break toward the largest
    threshold. Requires at least one positive.
    """
    p = s.n_positive
    if p == 0:
        raise MetricUndefinedError("f1 threshold undefined: no positive samples")
    thresholds, tp, npred = _descending_groups(s)
    # F1 = 2 TP / (npred + P); denominator always > 0 here
    f1 = 2.0 * tp / (npred + p)
    best = int(np.argmax(f1))  # first max = largest threshold
    return ThresholdResult(threshold=float(thresholds[best]), f1=float(f1[best]))


def classification_metrics(s: ScoredSet, threshold: float) -> MetricsReport:
    """Confusion-based metrics with prediction = score >= threshold.

    Precision and recall fall back to 0 when undefined, and F1 is
    2 P R / (P + R) with the same convention. ROC/PR AUC fields are left
    for the caller to fill.
    """
    pred = s.scores >= threshold
    actual = s.labels == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    tn = int(np.sum(~pred & ~actual))
    accuracy = (tp + tn) / s.labels.size
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        threshold=float(threshold),
    )


def pixel_metrics(maps: list[AnomalyMap], truths: list[np.ndarray]) -> PixelMetrics:
    """Pixel-level AUROC and F1 over all test pixels pooled into one set.

    Every map needs a matching-dimension truth mask; the F1 uses the
    F1-optimal threshold of the pooled set. Undefined when no anomalous
    pixel exists anywhere.
    """
    if len(maps) != len(truths):
        raise ValidationError(
            f"{len(maps)} maps vs {len(truths)} truth masks"
        )
    if not maps:
        raise MetricUndefinedError("pixel metrics undefined: no test images")
    scores = []
    labels = []
    for amap, truth in zip(maps, truths):
        truth = np.asarray(truth, dtype=bool)
        if truth.shape != amap.scores.shape:
            raise ValidationError(
                f"map {amap.image_id!r}: truth shape {truth.shape} does not "
                f"match map shape {amap.scores.shape}"
            )
        scores.append(amap.scores.ravel())
        labels.append(truth.ravel())
    pooled = ScoredSet(np.concatenate(scores), np.concatenate(labels))
    if pooled.n_positive == 0:
        raise MetricUndefinedError(
            "pixel metrics undefined: no anomalous pixels in the test set"
        )
    auroc = roc_auc(pooled)
    thr = f1_opt_threshold(pooled)
    return PixelMetrics(pixel_auroc=auroc, pixel_f1=thr.f1, threshold=thr.threshold)


def aggregate_runs(reports: list[MetricsReport]) -> RunAggregate:
    """Mean and sample std per metric across runs.

    A metric is aggregated only if present in every run; std is 0 for a
    single run and exactly 0 for identical runs.
    """
    if not reports:
        raise ValidationError("cannot aggregate zero runs")
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for name in METRIC_FIELDS:
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            continue
        arr = np.asarray(values, dtype=np.float64)
        mean[name] = float(arr.mean())
        if arr.size == 1 or arr.min() == arr.max():
            # identical runs (deterministic model) must report exactly 0
            std[name] = 0.0
        else:
            std[name] = float(arr.std(ddof=1))
    return RunAggregate(mean=mean, std=std, runs=len(reports))
