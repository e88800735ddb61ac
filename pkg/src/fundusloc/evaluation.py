"""Quantitative evaluation: box overlap, classification metrics, ROC/AUC,
and deterministic stratified splits.

Unit conventions follow the reporting style of the localization tables:
precision, recall, specificity, localization accuracy, and mean overlap
are percentages (0-100); F1, IOU, coverage, AUC, and ROC coordinates are
ratios (0-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import (
    EmptyInput,
    InvalidBox,
    StratificationImpossible,
    UndefinedROC,
    Unreachable,
)
from .geometry import BoundingBox

__all__ = [
    "ConfusionMatrix",
    "ScoredPrediction",
    "LocalizationPair",
    "MetricValue",
    "RocPoint",
    "OperatingPoint",
    "ClassificationReport",
    "FoldAssignment",
    "SubsampleSplit",
    "iou",
    "gt_coverage",
    "localization_accuracy",
    "mean_overlap",
    "precision",
    "recall",
    "f1",
    "specificity",
    "classification_report",
    "roc_curve",
    "auc",
    "sensitivity_at_specificity",
    "stratified_kfold",
    "stratified_subsample",
]


# -- box overlap ------------------------------------------------------------

def _intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    iw = min(a.x1, b.x1) - max(a.x, b.x)
    ih = min(a.y1, b.y1) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, exact on integer boxes."""
    if a.area <= 0 or b.area <= 0:
        raise InvalidBox("iou needs boxes with positive area")
    inter = _intersection_area(a, b)
    return inter / (a.area + b.area - inter)


def gt_coverage(pred: BoundingBox, truth: BoundingBox) -> float:
    """Fraction of the ground-truth box contained in the prediction."""
    if pred.area <= 0 or truth.area <= 0:
        raise InvalidBox("gt_coverage needs boxes with positive area")
    return _intersection_area(pred, truth) / truth.area


_OVERLAP_METRICS = {"iou": iou, "coverage": gt_coverage}


@dataclass(frozen=True)
class LocalizationPair:
    """One image's predicted box (or None when localization failed) and
    its ground-truth box."""

    image_id: str
    predicted: BoundingBox | None
    truth: BoundingBox


def _pair_overlap(pair: LocalizationPair, metric: str) -> float:
    if pair.predicted is None:
        return 0.0
    return _OVERLAP_METRICS[metric](pair.predicted, pair.truth)


def localization_accuracy(pairs: Sequence[LocalizationPair],
                          thresholds: Sequence[float],
                          metric: str = "iou") -> dict[float, float]:
    """Percent of pairs whose overlap strictly exceeds each threshold.

    Threshold 0 therefore means "any overlap at all". A missing
    prediction counts as a failure at every threshold.
    """
    if metric not in _OVERLAP_METRICS:
        raise ValueError(f"metric must be one of {sorted(_OVERLAP_METRICS)}, got {metric!r}")
    if not pairs:
        raise EmptyInput("no localization pairs to evaluate")
    for t in thresholds:
        if not 0 <= t < 1:
            raise ValueError(f"thresholds must lie in [0, 1), got {t}")
    values = [_pair_overlap(p, metric) for p in pairs]
    return {
        float(t): 100.0 * sum(1 for v in values if v > t) / len(values)
        for t in thresholds
    }


def mean_overlap(pairs: Sequence[LocalizationPair], metric: str = "iou") -> float:
    """Arithmetic mean overlap as a percentage; missing predictions
    contribute zero."""
    if metric not in _OVERLAP_METRICS:
        raise ValueError(f"metric must be one of {sorted(_OVERLAP_METRICS)}, got {metric!r}")
    if not pairs:
        raise EmptyInput("no localization pairs to evaluate")
    return 100.0 * sum(_pair_overlap(p, metric) for p in pairs) / len(pairs)


# -- confusion matrix and derived metrics -------------------------------------

class ConfusionMatrix:
    """Counts per (true class, predicted class) pair.

    Classes default to ("healthy", "glaucoma") but any fixed class tuple
    works. Cells not provided are zero.
    """

    DEFAULT_CLASSES = ("healthy", "glaucoma")

    def __init__(self, cells: Mapping[tuple[str, str], int],
                 classes: Sequence[str] | None = None):
        if classes is None:
            classes = self.DEFAULT_CLASSES
        self.classes: tuple[str, ...] = tuple(classes)
        cls_set = set(self.classes)
        self._cells: dict[tuple[str, str], int] = {}
        for (t, p), n in cells.items():
            if t not in cls_set or p not in cls_set:
                raise ValueError(f"cell ({t!r}, {p!r}) outside classes {self.classes}")
            if n < 0:
                raise ValueError(f"cell ({t!r}, {p!r}) has negative count {n}")
            self._cells[(t, p)] = int(n)

    @classmethod
    def from_predictions(cls, labeled: Iterable[tuple[str, str]],
                         classes: Sequence[str] | None = None) -> "ConfusionMatrix":
        """Build from (true, predicted) label pairs."""
        pairs = list(labeled)
        if classes is None:
            seen = sorted({t for t, _ in pairs} | {p for _, p in pairs})
            classes = [c for c in cls.DEFAULT_CLASSES if c in seen] or seen
            classes += [c for c in seen if c not in classes]
        cells: dict[tuple[str, str], int] = {}
        for t, p in pairs:
            cells[(t, p)] = cells.get((t, p), 0) + 1
        return cls(cells, classes)

    def count(self, true: str, predicted: str) -> int:
        return self._cells.get((true, predicted), 0)

    @property
    def total(self) -> int:
        return sum(self._cells.values())

    def support(self, cls_name: str) -> int:
        return sum(self.count(cls_name, p) for p in self.classes)

    def predicted_count(self, cls_name: str) -> int:
        return sum(self.count(t, cls_name) for t in self.classes)

    def diagonal(self) -> int:
        return sum(self.count(c, c) for c in self.classes)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "cells": {f"{t}->{p}": self.count(t, p)
                      for t in self.classes for p in self.classes},
        }


class MetricValue(NamedTuple):
    """A metric plus a degeneracy flag; a zero denominator yields value 0
    with ``degenerate`` set instead of an error."""

    value: float
    degenerate: bool = False


def _ratio(num: int, den: int, scale: float) -> MetricValue:
    if den == 0:
        return MetricValue(0.0, True)
    return MetricValue(scale * num / den, False)


def precision(cm: ConfusionMatrix, cls_name: str) -> MetricValue:
    """TP / (TP + FP), one-vs-rest, as a percentage."""
    return _ratio(cm.count(cls_name, cls_name), cm.predicted_count(cls_name), 100.0)


def recall(cm: ConfusionMatrix, cls_name: str) -> MetricValue:
    """TP / (TP + FN), one-vs-rest, as a percentage."""
    return _ratio(cm.count(cls_name, cls_name), cm.support(cls_name), 100.0)


def f1(cm: ConfusionMatrix, cls_name: str) -> MetricValue:
    """Harmonic mean of precision and recall, as a ratio in [0, 1].

    Computed as 2*TP / (2*TP + FP + FN), which is exact and avoids
    compounding the rounding of the two percentages.
    """
    tp = cm.count(cls_name, cls_name)
    fp = cm.predicted_count(cls_name) - tp
    fn = cm.support(cls_name) - tp
    return _ratio(2 * tp, 2 * tp + fp + fn, 1.0)


def specificity(cm: ConfusionMatrix, cls_name: str) -> MetricValue:
    """TN / (TN + FP), one-vs-rest, as a percentage."""
    tp = cm.count(cls_name, cls_name)
    fp = cm.predicted_count(cls_name) - tp
    tn = cm.total - cm.support(cls_name) - fp
    return _ratio(tn, tn + fp, 100.0)


@dataclass(frozen=True)
class ClassMetrics:
    precision: MetricValue
    recall: MetricValue
    f1: MetricValue
    specificity: MetricValue
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    """Per-class metrics plus support-weighted totals and accuracy.

    Weighted recall equals accuracy by construction.
    """

    per_class: dict[str, ClassMetrics]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    total: int

    def to_dict(self) -> dict:
        return {
            "per_class": {
                c: {
                    "precision_pct": m.precision.value,
                    "recall_pct": m.recall.value,
                    "f1": m.f1.value,
                    "specificity_pct": m.specificity.value,
                    "support": m.support,
                    "degenerate": m.precision.degenerate or m.recall.degenerate
                                  or m.f1.degenerate or m.specificity.degenerate,
                }
                for c, m in self.per_class.items()
            },
            "weighted_precision_pct": self.weighted_precision,
            "weighted_recall_pct": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "accuracy_pct": self.accuracy,
            "total": self.total,
        }

    def to_text(self) -> str:
        lines = [f"{'Class':<12} {'Precision(%)':>12} {'Recall(%)':>10} "
                 f"{'F1':>8} {'Spec(%)':>8} {'N':>6}"]
        for c, m in self.per_class.items():
            lines.append(f"{c:<12} {m.precision.value:>12.2f} {m.recall.value:>10.2f} "
                         f"{m.f1.value:>8.4f} {m.specificity.value:>8.2f} {m.support:>6d}")
        lines.append(f"{'Total':<12} {self.weighted_precision:>12.2f} "
                     f"{self.weighted_recall:>10.2f} {self.weighted_f1:>8.4f} "
                     f"{'':>8} {self.total:>6d}")
        lines.append(f"Accuracy: {self.accuracy:.2f}%")
        return "\n".join(lines)


def classification_report(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class precision/recall/F1/specificity with support-weighted totals."""
    total = cm.total
    if total == 0:
        raise EmptyInput("confusion matrix is empty")
    per_class = {
        c: ClassMetrics(precision(cm, c), recall(cm, c), f1(cm, c),
                        specificity(cm, c), cm.support(c))
        for c in cm.classes
    }
    wp = sum(m.support * m.precision.value for m in per_class.values()) / total
    wr = sum(m.support * m.recall.value for m in per_class.values()) / total
    wf = sum(m.support * m.f1.value for m in per_class.values()) / total
    accuracy = 100.0 * cm.diagonal() / total
    return ClassificationReport(per_class, wp, wr, wf, accuracy, total)


# -- ROC / AUC ----------------------------------------------------------------

class ScoredPrediction(NamedTuple):
    """Classifier output for one image: the score is the confidence of the
    positive class, in [0, 1]."""

    image_id: str
    true_label: str
    score: float


def _split_scores(preds: Sequence[ScoredPrediction], positive: str):
    pos, neg = [], []
    for p in preds:
        if not 0.0 <= p.score <= 1.0:
            raise ValueError(f"score {p.score} for {p.image_id!r} outside [0, 1]")
        (pos if p.true_label == positive else neg).append(p.score)
    if not pos or not neg:
        raise UndefinedROC(
            f"need at least one positive and one negative, got {len(pos)}/{len(neg)}"
        )
    return pos, neg


class RocPoint(NamedTuple):
    specificity: float
    sensitivity: float
    threshold: float  # predict positive iff score >= threshold; inf = predict nothing


def roc_curve(preds: Sequence[ScoredPrediction], positive: str) -> list[RocPoint]:
    """Operating points swept over every distinct score.

    Equal scores collapse into a single threshold step. The list starts
    at (specificity 1, sensitivity 0) for the empty prediction set and
    ends at (0, 1) where everything is predicted positive.
    """
    pos, neg = _split_scores(preds, positive)
    np_, nn = len(pos), len(neg)
    points = [RocPoint(1.0, 0.0, math.inf)]
    tp = fp = 0
    pos_at: dict[float, int] = {}
    neg_at: dict[float, int] = {}
    for s in pos:
        pos_at[s] = pos_at.get(s, 0) + 1
    for s in neg:
        neg_at[s] = neg_at.get(s, 0) + 1
    for s in sorted(set(pos_at) | set(neg_at), reverse=True):
        tp += pos_at.get(s, 0)
        fp += neg_at.get(s, 0)
        points.append(RocPoint((nn - fp) / nn, tp / np_, s))
    return points


def auc(preds: Sequence[ScoredPrediction], positive: str) -> float:
    """Trapezoidal area under the tie-grouped ROC curve.

    Equals the pair-counting statistic (positive-above-negative pairs
    plus half credit for ties, over all P*N pairs).
    """
    points = roc_curve(preds, positive)
    area = 0.0
    for prev, cur in zip(points, points[1:]):
        # x axis is the false positive rate (1 - specificity)
        dx = prev.specificity - cur.specificity
        area += dx * (prev.sensitivity + cur.sensitivity) / 2.0
    return area


class OperatingPoint(NamedTuple):
    sensitivity: float
    specificity: float
    threshold: float


def sensitivity_at_specificity(preds: Sequence[ScoredPrediction], positive: str,
                               target: float = 0.85) -> OperatingPoint:
    """Sensitivity at the observed operating point whose specificity is
    the smallest one at or above ``target`` (closest from above, never
    interpolated)."""
    if not 0 <= target <= 1:
        raise ValueError(f"target specificity must be in [0, 1], got {target}")
    points = roc_curve(preds, positive)
    qualifying = [pt for pt in points if pt.specificity >= target]
    if not qualifying:
        best = max(points, key=lambda pt: pt.specificity)
        raise Unreachable(
            f"no operating point reaches specificity {target}; best is "
            f"{best.specificity:.4f} (sensitivity {best.sensitivity:.4f})",
            best=OperatingPoint(best.sensitivity, best.specificity, best.threshold),
        )
    chosen = min(qualifying, key=lambda pt: (pt.specificity, -pt.sensitivity))
    return OperatingPoint(chosen.sensitivity, chosen.specificity, chosen.threshold)


# -- deterministic stratified splits -------------------------------------------

class _SplitMix64:
    """Tiny deterministic PRNG (splitmix64) so shuffles depend only on the
    64-bit seed, not on any library's stream versioning."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        # modulo bias is negligible for n far below 2^64
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def _by_class(items: Sequence[tuple[str, str]]) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for image_id, label in items:
        groups.setdefault(label, []).append(image_id)
    for ids in groups.values():
        ids.sort()
    return groups


def _labeled_items(manifest) -> list[tuple[str, str]]:
    """Accept a DatasetManifest or a plain iterable of (id, label)."""
    images = getattr(manifest, "images", None)
    if images is not None:
        return [(im.image_id, im.label) for im in images]
    return [(str(i), str(l)) for i, l in manifest]


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of image ids into k folds."""

    k: int
    assignment: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(i for i, f in self.assignment.items() if f == fold)

    def to_dict(self) -> dict:
        return {"k": self.k, "assignment": dict(self.assignment)}


def stratified_kfold(manifest, k: int, seed: int) -> FoldAssignment:
    """Deal each class's seed-shuffled members round-robin into k folds.

    Per-class fold sizes differ by at most one; the same seed always
    reproduces the same assignment.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    groups = _by_class(_labeled_items(manifest))
    if not groups:
        raise EmptyInput("no labeled images to split")
    for label, ids in groups.items():
        if len(ids) < k:
            raise StratificationImpossible(
                f"class {label!r} has {len(ids)} members, fewer than k={k}"
            )
    rng = _SplitMix64(seed)
    assignment: dict[str, int] = {}
    for label in sorted(groups):
        ids = groups[label]
        rng.shuffle(ids)
        for i, image_id in enumerate(ids):
            assignment[image_id] = i % k
    return FoldAssignment(k, assignment)


@dataclass(frozen=True)
class SubsampleSplit:
    """Train/test id split; ``forced_min_per_class`` flags the degraded
    case where the requested train size could not honor one-per-class."""

    train: list[str]
    test: list[str]
    forced_min_per_class: bool = False

    def to_dict(self) -> dict:
        return {"train": list(self.train), "test": list(self.test),
                "forced_min_per_class": self.forced_min_per_class}


def _apportion(counts: dict[str, int], n: int) -> tuple[dict[str, int], bool]:
    """Largest-remainder apportionment of n across classes, at least one
    member per class."""
    total = sum(counts.values())
    quotas = {c: n * counts[c] / total for c in counts}
    take = {c: math.floor(q) for c, q in quotas.items()}
    remainders = sorted(counts, key=lambda c: (take[c] - quotas[c], c))
    i = 0
    while sum(take.values()) < n:
        take[remainders[i % len(remainders)]] += 1
        i += 1
    forced = False
    for c in counts:
        if take[c] == 0:
            take[c] = 1
            forced = True
    return take, forced


def stratified_subsample(manifest, n_per_run: int, seed: int) -> SubsampleSplit:
    """Seed-deterministic train/test split with ``n_per_run`` training images
    whose class ratio tracks the dataset's to within one image."""
    items = _labeled_items(manifest)
    if not 0 < n_per_run < len(items):
        raise ValueError(
            f"n_per_run must be in (0, {len(items)}), got {n_per_run}"
        )
    groups = _by_class(items)
    counts = {c: len(ids) for c, ids in groups.items()}
    take, forced = _apportion(counts, n_per_run)
    rng = _SplitMix64(seed)
    train: list[str] = []
    test: list[str] = []
    for label in sorted(groups):
        ids = groups[label]
        rng.shuffle(ids)
        cut = min(take[label], len(ids))
        train.extend(ids[:cut])
        test.extend(ids[cut:])
    return SubsampleSplit(sorted(train), sorted(test), forced)
