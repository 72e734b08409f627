"""Pseudo-label quality metrics.

Pseudo-labels are scored as if they were predictions. Everything is
accumulated as integer pixel counts, and ratios are only formed at the end,
so per-image results can be merged in any order with identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .raster import IGNORE, LabelMap, check_label_map, require_same_shape


@dataclass
class ConfusionMatrix:
    """Rows are ground truth, columns prediction.

    ``unlabeled[c]`` counts pixels of GT class ``c`` predicted as 255 when
    those are scored as errors. They add to class ``c``'s false negatives
    and to no class's false positives.
    """

    num_classes: int
    counts: np.ndarray = None
    unlabeled: np.ndarray = None

    def __post_init__(self):
        n = self.num_classes
        if self.counts is None:
            self.counts = np.zeros((n, n), dtype=np.int64)
        if self.unlabeled is None:
            self.unlabeled = np.zeros(n, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.unlabeled = np.asarray(self.unlabeled, dtype=np.int64)

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge confusion matrices of different sizes")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts, self.unlabeled + other.unlabeled)

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.unlabeled.sum())


def accumulate_confusion(
    pred: LabelMap,
    gt: LabelMap,
    num_classes: int,
    cm: ConfusionMatrix | None = None,
    count_pred_ignore_as_error: bool = True,
) -> ConfusionMatrix:
    """Add one (pred, gt) pair to ``cm`` and return the updated matrix.

    GT pixels equal to 255 are skipped. Predicted 255 pixels are charged to
    the GT class as misses, or skipped when ``count_pred_ignore_as_error`` is
    False.
    """
    require_same_shape("prediction vs ground truth", pred, gt)
    check_label_map(pred, num_classes, "prediction")
    check_label_map(gt, num_classes, "ground truth")
    if cm is None:
        cm = ConfusionMatrix(num_classes)
    elif cm.num_classes != num_classes:
        raise ValueError(f"confusion matrix has {cm.num_classes} classes, expected {num_classes}")

    p = pred.data.ravel()
    g = gt.data.ravel()
    valid = g != IGNORE
    pred_ignored = valid & (p == IGNORE)
    scored = valid & ~pred_ignored
    n = num_classes
    counts = np.bincount(g[scored].astype(np.int64) * n + p[scored], minlength=n * n).reshape(n, n)
    unlabeled = np.zeros(n, dtype=np.int64)
    if count_pred_ignore_as_error:
        unlabeled = np.bincount(g[pred_ignored], minlength=n).astype(np.int64)
    return ConfusionMatrix(n, cm.counts + counts, cm.unlabeled + unlabeled)


@dataclass
class IoUResult:
    per_class_iou: dict[int, float]
    miou: float | None


def iou_from_confusion(cm: ConfusionMatrix) -> IoUResult:
    """Per-class IoU = TP / (TP + FP + FN); classes with an empty union are left out."""
    tp = np.diag(cm.counts)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp + cm.unlabeled
    union = tp + fp + fn
    present = [c for c in range(cm.num_classes) if union[c] > 0]
    per_class = {c: int(tp[c]) / int(union[c]) for c in present}
    # exact rational mean, rounded once
    miou = float(sum(Fraction(int(tp[c]), int(union[c])) for c in present) / len(present)) if present else None
    return IoUResult(per_class, miou)


@dataclass
class PrecisionRecallCounts:
    """Integer tallies behind labeled-pixel precision and foreground recall."""

    correct_labeled: int = 0
    labeled: int = 0
    correct_foreground: int = 0
    foreground: int = 0

    def __add__(self, other: "PrecisionRecallCounts") -> "PrecisionRecallCounts":
        return PrecisionRecallCounts(
            self.correct_labeled + other.correct_labeled,
            self.labeled + other.labeled,
            self.correct_foreground + other.correct_foreground,
            self.foreground + other.foreground,
        )

    @property
    def precision(self) -> float | None:
        return self.correct_labeled / self.labeled if self.labeled else None

    @property
    def recall(self) -> float | None:
        return self.correct_foreground / self.foreground if self.foreground else None


def precision_recall_counts(pred: LabelMap, gt: LabelMap) -> PrecisionRecallCounts:
    require_same_shape("prediction vs ground truth", pred, gt)
    p = pred.data
    g = gt.data
    valid = g != IGNORE
    labeled = valid & (p != 0) & (p != IGNORE)
    foreground = valid & (g != 0)
    hit = p == g
    return PrecisionRecallCounts(
        int((labeled & hit).sum()),
        int(labeled.sum()),
        int((foreground & hit).sum()),
        int(foreground.sum()),
    )


def precision_recall(pred: LabelMap, gt: LabelMap) -> tuple[float | None, float | None]:
    """(labeled-pixel precision, foreground recall) over pixels where gt != 255.

    Precision looks only at pixels the pseudo-label commits to a foreground
    class; recall at all foreground GT pixels. Either is None when its
    denominator is empty.
    """
    counts = precision_recall_counts(pred, gt)
    return counts.precision, counts.recall


@dataclass
class EvalReport:
    per_class_iou: dict[int, float]
    miou: float | None
    pixel_accuracy: float
    labeled_precision: float | None
    foreground_recall: float | None
    images_evaluated: int

    def to_dict(self) -> dict:
        return {
            "miou": self.miou,
            "per_class_iou": {str(c): v for c, v in sorted(self.per_class_iou.items())},
            "pixel_accuracy": self.pixel_accuracy,
            "labeled_precision": self.labeled_precision,
            "foreground_recall": self.foreground_recall,
            "images_evaluated": self.images_evaluated,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass
class EvalAccumulator:
    """Mergeable integer state for :func:`upper_bound_report`."""

    num_classes: int
    count_pred_ignore_as_error: bool = True
    cm: ConfusionMatrix = None
    pr: PrecisionRecallCounts = field(default_factory=PrecisionRecallCounts)
    images: int = 0

    def __post_init__(self):
        if self.cm is None:
            self.cm = ConfusionMatrix(self.num_classes)

    def add(self, pred: LabelMap, gt: LabelMap) -> None:
        self.cm = accumulate_confusion(pred, gt, self.num_classes, self.cm, self.count_pred_ignore_as_error)
        self.pr = self.pr + precision_recall_counts(pred, gt)
        self.images += 1

    def merge(self, other: "EvalAccumulator") -> None:
        self.cm = self.cm.merge(other.cm)
        self.pr = self.pr + other.pr
        self.images += other.images

    def report(self) -> EvalReport:
        iou = iou_from_confusion(self.cm)
        total = self.cm.total
        accuracy = int(np.trace(self.cm.counts)) / total if total else 0.0
        return EvalReport(
            per_class_iou=iou.per_class_iou,
            miou=iou.miou,
            pixel_accuracy=accuracy,
            labeled_precision=self.pr.precision,
            foreground_recall=self.pr.recall,
            images_evaluated=self.images,
        )


def upper_bound_report(
    dataset: Iterable[tuple[LabelMap, LabelMap]],
    num_classes: int,
    count_pred_ignore_as_error: bool = True,
) -> EvalReport:
    """Score a whole dataset of (pseudo-label, ground truth) pairs with one pooled matrix."""
    acc = EvalAccumulator(num_classes, count_pred_ignore_as_error)
    for pred, gt in dataset:
        acc.add(pred, gt)
    return acc.report()
