"""Calibration curves, open-world threshold metrics, F1 and ROC tooling.

Attribution outcomes are reduced to (confidence, outcome) records. Outcomes
are ``correct``, ``incorrect_in_world`` (wrong suspect) or ``out_of_world``
(true author outside the suspect set). Curves bin confidences in 10% steps;
threshold metrics score the three selection criteria per threshold.

Conventions: "above threshold" means confidence >= t, "below" means < t;
confidence 1.0 joins the top bin; undefined precision/recall is reported as
None rather than 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

OUTCOMES = ("correct", "incorrect_in_world", "out_of_world")


class CalibrationError(Exception):
    pass


@dataclass(frozen=True)
class AttributionRecord:
    id: str
    confidence: float
    outcome: str

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise CalibrationError(f"confidence {self.confidence} outside [0, 1]")
        if self.outcome not in OUTCOMES:
            raise CalibrationError(f"unknown outcome {self.outcome!r}")


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    correct: int
    incorrect_in_world: int
    out_of_world: int
    accuracy: float | None  # among in-world records; None if bin has none

    @property
    def total(self) -> int:
        return self.correct + self.incorrect_in_world + self.out_of_world


@dataclass(frozen=True)
class CalibrationCurve:
    bins: tuple  # 10 CalibrationBin records, lower bounds 0.0 .. 0.9
    total: int


@dataclass(frozen=True)
class ThresholdMetrics:
    threshold: float
    # criterion 1: correct attributions above the threshold
    # criterion 2: out-of-world samples below the threshold
    # criterion 3: out-of-world or incorrect samples below the threshold
    precision: tuple  # three entries, each float or None
    recall: tuple
    f1: tuple


def bin_index(confidence: float) -> int:
    """Bin floor(10c); confidence 1.0 joins the top bin."""
    return min(int(confidence * 10), 9)


def build_calibration_curve(records) -> CalibrationCurve:
    records = list(records)
    if not records:
        raise CalibrationError("cannot build a curve from zero records")
    counts = [[0, 0, 0] for _ in range(10)]
    for rec in records:
        counts[bin_index(rec.confidence)][OUTCOMES.index(rec.outcome)] += 1
    bins = []
    for i, (c, inc, oow) in enumerate(counts):
        in_world = c + inc
        bins.append(CalibrationBin(
            lower=i / 10,
            correct=c,
            incorrect_in_world=inc,
            out_of_world=oow,
            accuracy=c / in_world if in_world else None,
        ))
    return CalibrationCurve(bins=tuple(bins), total=len(records))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean 2pr/(p+r); zero when both are zero."""
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise CalibrationError("precision and recall must be in [0, 1]")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def threshold_metrics(records, t: float) -> ThresholdMetrics:
    records = list(records)
    if not 0.0 <= t <= 1.0:
        raise CalibrationError("threshold must be in [0, 1]")
    above = [r for r in records if r.confidence >= t]
    below = [r for r in records if r.confidence < t]
    n_correct = sum(r.outcome == "correct" for r in records)
    n_oow = sum(r.outcome == "out_of_world" for r in records)
    n_false = sum(r.outcome != "correct" for r in records)

    correct_above = sum(r.outcome == "correct" for r in above)
    oow_below = sum(r.outcome == "out_of_world" for r in below)
    false_below = sum(r.outcome != "correct" for r in below)

    precision = (
        _ratio(correct_above, len(above)),
        _ratio(oow_below, len(below)),
        _ratio(false_below, len(below)),
    )
    recall = (
        _ratio(correct_above, n_correct),
        _ratio(oow_below, n_oow),
        _ratio(false_below, n_false),
    )
    f1 = tuple(
        f1_score(p, r) if p is not None and r is not None else None
        for p, r in zip(precision, recall)
    )
    return ThresholdMetrics(threshold=t, precision=precision, recall=recall, f1=f1)


def metrics_sweep(records):
    """ThresholdMetrics at t = 0.0, 0.1, ..., 1.0 plus per-criterion argmax-F1.

    Returns (metrics list, best thresholds tuple); a best threshold is None
    when no threshold yields a defined F1 for that criterion.
    """
    records = list(records)
    metrics = [threshold_metrics(records, t / 10) for t in range(11)]
    best = []
    for criterion in range(3):
        candidates = [m for m in metrics if m.f1[criterion] is not None]
        if not candidates:
            best.append(None)
        else:
            best.append(max(candidates, key=lambda m: m.f1[criterion]).threshold)
    return metrics, tuple(best)


def roc_points(records):
    """ROC for detecting false attributions by thresholding confidence.

    Positive class = incorrect or out-of-world; predicted positive iff
    confidence < t. Points are sorted by t and span (0,0) to (1,1).
    """
    records = list(records)
    if not records:
        raise CalibrationError("cannot build ROC from zero records")
    n_pos = sum(r.outcome != "correct" for r in records)
    n_neg = len(records) - n_pos
    thresholds = [0.0] + sorted({r.confidence for r in records}) + [
        max(r.confidence for r in records) + 1e-9
    ]
    points = []
    for t in thresholds:
        below = [r for r in records if r.confidence < t]
        tp = sum(r.outcome != "correct" for r in below)
        fp = len(below) - tp
        tpr = tp / n_pos if n_pos else 0.0
        fpr = fp / n_neg if n_neg else 0.0
        points.append((t, fpr, tpr))
    return points


def write_calibration_csv(curve: CalibrationCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([
            "bin_lower", "correct", "incorrect", "out_of_world",
            "accuracy", "percent_of_samples",
        ])
        for b in curve.bins:
            w.writerow([
                f"{b.lower:.1f}", b.correct, b.incorrect_in_world, b.out_of_world,
                "" if b.accuracy is None else f"{b.accuracy:.6f}",
                f"{100.0 * b.total / curve.total:.4f}",
            ])


def write_thresholds_csv(metrics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "criterion", "precision", "recall", "f1"])
        for m in metrics:
            for criterion in range(3):
                fmt = lambda v: "" if v is None else f"{v:.6f}"
                w.writerow([
                    f"{m.threshold:.1f}", criterion + 1,
                    fmt(m.precision[criterion]), fmt(m.recall[criterion]),
                    fmt(m.f1[criterion]),
                ])


def write_roc_csv(points, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for t, fpr, tpr in points:
            w.writerow([f"{t:.9f}", f"{fpr:.6f}", f"{tpr:.6f}"])
