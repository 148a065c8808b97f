"""Segmentation metrics, margin distance statistics, success
classification and rank correlation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats
from scipy.spatial import cKDTree

from .errors import MetricError

SUCCESS_THRESHOLD_UM = 200.0


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def _safe_ratio(num, den, vacuous_perfect):
    if den == 0:
        return 1.0 if vacuous_perfect else 0.0
    return num / den


def segmentation_metrics(pred, truth):
    """(ConfusionCounts, DSC, SEN, PPV) over per-face binary labels.

    Zero denominators: a metric is 1 when there are no positives anywhere
    to miss (vacuously perfect), 0 otherwise."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise MetricError(
            f"label length mismatch: {pred.shape} vs {truth.shape}"
        )
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    counts = ConfusionCounts(tp, fp, tn, fn)
    no_pos = tp + fp + fn == 0
    dsc = _safe_ratio(2 * tp, 2 * tp + fp + fn, no_pos)
    sen = _safe_ratio(tp, tp + fn, tp + fn == 0 and fp == 0)
    ppv = _safe_ratio(tp, tp + fp, tp + fp == 0 and fn == 0)
    return counts, dsc, sen, ppv


@dataclass
class DistanceStats:
    """Nearest-neighbor distance statistics in micrometers."""

    max_um: float
    mean_um: float
    std_um: float
    symmetric_max_um: float
    symmetric_mean_um: float
    symmetric_std_um: float


def margin_distance_stats(pred_points, truth_points) -> DistanceStats:
    """Primary direction is predicted -> truth; the symmetric variant
    pools both directions (max of maxes, stats of pooled distances).
    Inputs are mm; the report is in micrometers."""
    pred_points = np.asarray(pred_points, dtype=np.float64)
    truth_points = np.asarray(truth_points, dtype=np.float64)
    if len(pred_points) == 0 or len(truth_points) == 0:
        raise MetricError("empty point cloud")
    d_pt = cKDTree(truth_points).query(pred_points)[0] * 1000.0
    d_tp = cKDTree(pred_points).query(truth_points)[0] * 1000.0
    pooled = np.concatenate([d_pt, d_tp])
    return DistanceStats(
        max_um=float(d_pt.max()),
        mean_um=float(d_pt.mean()),
        std_um=float(d_pt.std()),
        symmetric_max_um=float(pooled.max()),
        symmetric_mean_um=float(pooled.mean()),
        symmetric_std_um=float(pooled.std()),
    )


def spearman(x, y):
    """Spearman rank correlation with average ranks for ties; p-value via
    the t-distribution approximation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 3:
        raise MetricError("need two equal-length vectors of length >= 3")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise MetricError("correlation undefined for a constant vector")
    r, p = scipy_stats.spearmanr(x, y)
    return float(r), float(p)


@dataclass
class CaseEvaluation:
    case_id: str
    confusion: ConfusionCounts | None
    dsc: float | None
    sen: float | None
    ppv: float | None
    distances: DistanceStats | None
    success: bool | None
    rating: float | None = None

    def row(self):
        d = self.distances
        return {
            "case_id": self.case_id,
            "rating": self.rating,
            "dsc": self.dsc,
            "sen": self.sen,
            "ppv": self.ppv,
            "max_um": None if d is None else d.max_um,
            "mean_um": None if d is None else d.mean_um,
            "std_um": None if d is None else d.std_um,
            "success": self.success,
        }


def evaluate_case(
    pred_labels=None,
    truth_labels=None,
    pred_margin_points=None,
    truth_margin_points=None,
    threshold_um=SUCCESS_THRESHOLD_UM,
    case_id="",
    rating=None,
) -> CaseEvaluation:
    """Per-case report row; success iff max distance <= threshold."""
    confusion = dsc = sen = ppv = None
    if pred_labels is not None and truth_labels is not None:
        confusion, dsc, sen, ppv = segmentation_metrics(pred_labels, truth_labels)
    distances = success = None
    if pred_margin_points is not None and truth_margin_points is not None:
        distances = margin_distance_stats(pred_margin_points, truth_margin_points)
        success = bool(distances.max_um <= threshold_um)
    return CaseEvaluation(
        case_id=case_id,
        confusion=confusion,
        dsc=dsc,
        sen=sen,
        ppv=ppv,
        distances=distances,
        success=success,
        rating=rating,
    )


def aggregate(evaluations):
    """Means and stds over cases plus the success count."""
    def _stats(values):
        values = [v for v in values if v is not None]
        if not values:
            return None, None
        return float(np.mean(values)), float(np.std(values))

    out = {}
    for key in ("dsc", "sen", "ppv"):
        out[key + "_mean"], out[key + "_std"] = _stats(
            [getattr(e, key) for e in evaluations]
        )
    for key in ("max_um", "mean_um", "std_um"):
        out[key + "_mean"], out[key + "_std"] = _stats(
            [
                getattr(e.distances, key)
                for e in evaluations
                if e.distances is not None
            ]
        )
    out["success_count"] = sum(1 for e in evaluations if e.success)
    out["n_cases"] = len(evaluations)
    return out
