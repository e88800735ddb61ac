import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fundusloc.errors import (
    EmptyInput,
    InvalidBox,
    StratificationImpossible,
    UndefinedROC,
)
from fundusloc.evaluation import (
    ConfusionMatrix,
    LocalizationPair,
    ScoredPrediction,
    auc,
    classification_report,
    f1,
    gt_coverage,
    iou,
    localization_accuracy,
    mean_overlap,
    precision,
    recall,
    roc_curve,
    sensitivity_at_specificity,
    specificity,
    stratified_kfold,
    stratified_subsample,
)
from fundusloc.geometry import BoundingBox

# 551 ORIGA test images: 412 healthy (391 correct), 139 glaucoma (48 correct)
CM_REFERENCE = ConfusionMatrix({
    ("healthy", "healthy"): 391,
    ("healthy", "glaucoma"): 21,
    ("glaucoma", "glaucoma"): 48,
    ("glaucoma", "healthy"): 91,
})

boxes = st.builds(
    BoundingBox,
    st.integers(0, 90), st.integers(0, 90),
    st.integers(1, 37), st.integers(1, 37),
)


def scored(pos_scores, neg_scores):
    preds = [ScoredPrediction(f"p{i}", "glaucoma", s) for i, s in enumerate(pos_scores)]
    preds += [ScoredPrediction(f"n{i}", "healthy", s) for i, s in enumerate(neg_scores)]
    return preds


# -- overlap -----------------------------------------------------------------

def test_iou_identity_and_disjoint():
    a = BoundingBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(50, 50, 10, 10)) == 0.0


def test_iou_quarter_overlap():
    a = BoundingBox(0, 0, 10, 10)
    b = BoundingBox(5, 5, 10, 10)
    inter, union, _ = oracles.raster_counts(a, b)
    assert (inter, union) == (25, 175)
    assert iou(a, b) == inter / union


def test_gt_coverage_examples():
    truth = BoundingBox(5, 5, 10, 10)
    assert gt_coverage(BoundingBox(0, 0, 30, 30), truth) == 1.0
    assert gt_coverage(BoundingBox(20, 20, 5, 5), truth) == 0.0
    pred = BoundingBox(0, 0, 10, 10)
    inter, _, area_t = oracles.raster_counts(pred, truth)
    assert gt_coverage(pred, truth) == inter / area_t == 0.25


def test_overlap_matches_rasterization():
    rng = np.random.default_rng(101)
    for _ in range(300):
        a = BoundingBox(*rng.integers(0, 80, 2), *rng.integers(1, 40, 2))
        b = BoundingBox(*rng.integers(0, 80, 2), *rng.integers(1, 40, 2))
        inter, union, area_b = oracles.raster_counts(a, b)
        assert iou(a, b) == inter / union
        assert gt_coverage(a, b) == inter / area_b


@settings(max_examples=80, deadline=None)
@given(boxes, boxes)
def test_iou_properties(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0
    assert v <= gt_coverage(a, b) + 1e-15
    assert v <= gt_coverage(b, a) + 1e-15


def test_zero_area_box_rejected():
    with pytest.raises(InvalidBox):
        BoundingBox(0, 0, 0, 5)


# -- localization tables ---------------------------------------------------------

def _pairs_with_overlaps(values):
    pairs = []
    truth = BoundingBox(0, 0, 10, 10)
    for i, v in enumerate(values):
        if v is None:
            pairs.append(LocalizationPair(f"im{i}", None, truth))
        elif v == 1.0:
            pairs.append(LocalizationPair(f"im{i}", truth, truth))
        else:
            # shifted box with known iou: shift s gives inter 10*(10-s)
            for s in range(1, 10):
                inter = 10 * (10 - s)
                if abs(inter / (200 - inter) - v) < 0.02:
                    pairs.append(LocalizationPair(
                        f"im{i}", BoundingBox(s, 0, 10, 10), truth))
                    break
            else:
                raise AssertionError(f"no shift approximates {v}")
    return pairs


def test_localization_accuracy_counts():
    truth = BoundingBox(0, 0, 10, 10)
    pairs = [
        LocalizationPair("a", BoundingBox(2, 0, 10, 10), truth),   # iou 80/120=0.667
        LocalizationPair("b", BoundingBox(6, 0, 10, 10), truth),   # iou 40/160=0.25
        LocalizationPair("c", truth, truth),                       # 1.0
    ]
    vals = [iou(p.predicted, p.truth) for p in pairs]
    expected = 100.0 * sum(1 for v in vals if v > 0.5) / 3
    table = localization_accuracy(pairs, [0.5])
    assert table[0.5] == pytest.approx(expected)
    assert table[0.5] == pytest.approx(200 / 3)


def test_localization_accuracy_all_perfect():
    truth = BoundingBox(3, 4, 7, 8)
    pairs = [LocalizationPair(str(i), truth, truth) for i in range(5)]
    table = localization_accuracy(pairs, [0, 0.2, 0.5, 0.8, 0.99])
    assert all(v == 100.0 for v in table.values())


def test_localization_accuracy_missing_prediction():
    truth = BoundingBox(0, 0, 10, 10)
    pairs = [LocalizationPair(str(i), truth, truth) for i in range(3)]
    pairs.append(LocalizationPair("missing", None, truth))
    table = localization_accuracy(pairs, [0, 0.5, 0.9])
    assert all(v == 75.0 for v in table.values())


def test_localization_accuracy_monotone_in_threshold():
    rng = np.random.default_rng(103)
    truth = BoundingBox(20, 20, 30, 30)
    pairs = [
        LocalizationPair(str(i), BoundingBox(*rng.integers(0, 60, 2), *rng.integers(5, 40, 2)), truth)
        for i in range(40)
    ]
    ts = [0, 0.1, 0.3, 0.5, 0.7, 0.9]
    table = localization_accuracy(pairs, ts)
    assert all(table[a] >= table[b] for a, b in zip(ts, ts[1:]))


def test_localization_accuracy_threshold_zero_means_any_overlap():
    truth = BoundingBox(0, 0, 10, 10)
    touching = LocalizationPair("t", BoundingBox(10, 10, 5, 5), truth)  # zero overlap
    barely = LocalizationPair("b", BoundingBox(9, 9, 5, 5), truth)      # 1 px overlap
    table = localization_accuracy([touching, barely], [0])
    assert table[0] == 50.0


def test_mean_overlap():
    truth = BoundingBox(0, 0, 10, 10)
    pairs = [LocalizationPair("a", truth, truth),
             LocalizationPair("b", None, truth)]
    assert mean_overlap(pairs) == 50.0
    assert mean_overlap([pairs[0]]) == 100.0
    with pytest.raises(EmptyInput):
        mean_overlap([])
    with pytest.raises(EmptyInput):
        localization_accuracy([], [0.5])


# -- confusion-matrix metrics ----------------------------------------------------

def test_reference_matrix_healthy_metrics():
    assert precision(CM_REFERENCE, "healthy").value == pytest.approx(81.12, abs=0.05)
    assert recall(CM_REFERENCE, "healthy").value == pytest.approx(94.90, abs=0.05)
    assert f1(CM_REFERENCE, "healthy").value == pytest.approx(0.8747, abs=5e-4)


def test_reference_matrix_glaucoma_metrics():
    assert precision(CM_REFERENCE, "glaucoma").value == pytest.approx(69.57, abs=0.05)
    assert recall(CM_REFERENCE, "glaucoma").value == pytest.approx(34.53, abs=0.05)
    assert f1(CM_REFERENCE, "glaucoma").value == pytest.approx(0.4615, abs=5e-4)


def test_perfect_diagonal_matrix():
    cm = ConfusionMatrix({("healthy", "healthy"): 10, ("glaucoma", "glaucoma"): 5})
    for cls in ("healthy", "glaucoma"):
        assert precision(cm, cls).value == 100.0
        assert recall(cm, cls).value == 100.0
        assert f1(cm, cls).value == 1.0
        assert specificity(cm, cls).value == 100.0


def test_specificity_formula():
    # for healthy: TN = 48 glaucoma predicted glaucoma, FP = 91
    assert specificity(CM_REFERENCE, "healthy").value == pytest.approx(100 * 48 / 139)
    assert specificity(CM_REFERENCE, "glaucoma").value == pytest.approx(100 * 391 / 412)


def test_degenerate_metrics_flagged():
    cm = ConfusionMatrix({("healthy", "healthy"): 10})
    p = precision(cm, "glaucoma")
    assert p.value == 0.0 and p.degenerate
    r = recall(cm, "glaucoma")
    assert r.value == 0.0 and r.degenerate
    s = specificity(cm, "healthy")
    assert s.value == 0.0 and s.degenerate


def test_classification_report_reference_totals():
    report = classification_report(CM_REFERENCE)
    assert report.per_class["healthy"].support == 412
    assert report.per_class["glaucoma"].support == 139
    assert report.total == 551
    assert report.weighted_precision == pytest.approx(78.21, abs=0.05)
    assert report.weighted_recall == pytest.approx(79.67, abs=0.05)
    assert report.weighted_f1 == pytest.approx(0.7705, abs=5e-4)
    assert report.accuracy == pytest.approx(report.weighted_recall)


def test_classification_report_single_class():
    cm = ConfusionMatrix({("healthy", "healthy"): 7}, classes=("healthy",))
    assert classification_report(cm).accuracy == 100.0


def test_accuracy_equals_support_weighted_recall():
    rng = np.random.default_rng(107)
    cells = {(t, p): int(rng.integers(0, 50))
             for t in ("healthy", "glaucoma") for p in ("healthy", "glaucoma")}
    cm = ConfusionMatrix(cells)
    report = classification_report(cm)
    manual = sum(recall(cm, c).value * cm.support(c) for c in cm.classes) / cm.total
    assert report.accuracy == pytest.approx(manual)


def test_empty_matrix_rejected():
    with pytest.raises(EmptyInput):
        classification_report(ConfusionMatrix({}))


# -- ROC / AUC ---------------------------------------------------------------------

def test_roc_perfect_separation():
    preds = scored([0.9, 0.8], [0.2, 0.1])
    points = roc_curve(preds, "glaucoma")
    assert any(p.specificity == 1.0 and p.sensitivity == 1.0 for p in points)
    assert auc(preds, "glaucoma") == 1.0


def test_roc_all_ties():
    preds = scored([0.5, 0.5], [0.5, 0.5])
    points = roc_curve(preds, "glaucoma")
    assert len(points) == 2
    assert points[0] == (1.0, 0.0, math.inf)
    assert (points[1].specificity, points[1].sensitivity) == (0.0, 1.0)
    assert auc(preds, "glaucoma") == 0.5


def test_roc_matches_enumeration():
    pos, neg = [0.9, 0.4], [0.6, 0.1]
    got = roc_curve(scored(pos, neg), "glaucoma")
    want = oracles.roc_enumerate(pos, neg)
    assert [(p.specificity, p.sensitivity, p.threshold) for p in got] == want
    assert auc(scored(pos, neg), "glaucoma") == pytest.approx(
        oracles.mann_whitney_auc(pos, neg), abs=1e-12)


def test_roc_monotone():
    rng = np.random.default_rng(109)
    pos = list(np.round(rng.random(20), 2))
    neg = list(np.round(rng.random(30), 2))
    points = roc_curve(scored(pos, neg), "glaucoma")
    for a, b in zip(points, points[1:]):
        assert b.sensitivity >= a.sensitivity
        assert b.specificity <= a.specificity
        assert b.threshold < a.threshold


def test_auc_matches_pair_count_oracle():
    rng = np.random.default_rng(113)
    for _ in range(50):
        pos = list(np.round(rng.random(int(rng.integers(1, 20))), 1))
        neg = list(np.round(rng.random(int(rng.integers(1, 20))), 1))
        preds = scored(pos, neg)
        assert auc(preds, "glaucoma") == pytest.approx(
            oracles.mann_whitney_auc(pos, neg), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1, max_size=15),
       st.lists(st.integers(0, 10), min_size=1, max_size=15))
def test_auc_flip_identity(pos_raw, neg_raw):
    pos = [s / 10 for s in pos_raw]
    neg = [s / 10 for s in neg_raw]
    direct = auc(scored(pos, neg), "glaucoma")
    flipped = auc(scored([1 - s for s in pos], [1 - s for s in neg]), "glaucoma")
    assert direct + flipped == pytest.approx(1.0, abs=1e-9)


def test_roc_single_class_rejected():
    with pytest.raises(UndefinedROC):
        roc_curve(scored([0.5], []), "glaucoma")
    with pytest.raises(UndefinedROC):
        auc(scored([], [0.5]), "glaucoma")


def test_score_out_of_range_rejected():
    with pytest.raises(ValueError):
        auc(scored([1.5], [0.5]), "glaucoma")


# -- sensitivity at specificity -------------------------------------------------------

def test_sensitivity_at_specificity_perfect():
    preds = scored([0.9, 0.8], [0.2, 0.1])
    for target in (0.5, 0.85, 1.0):
        op = sensitivity_at_specificity(preds, "glaucoma", target)
        assert op.sensitivity == 1.0
        assert op.specificity >= target


def test_sensitivity_at_specificity_all_ties_degenerates():
    preds = scored([0.5, 0.5], [0.5, 0.5])
    op = sensitivity_at_specificity(preds, "glaucoma", 0.85)
    assert op == (0.0, 1.0, math.inf)


def test_sensitivity_at_specificity_enumerated():
    pos, neg = [0.9, 0.8, 0.3], [0.7, 0.6, 0.2, 0.1]
    target = 0.75
    points = oracles.roc_enumerate(pos, neg)
    qualifying = [p for p in points if p[0] >= target]
    want = min(qualifying, key=lambda p: (p[0], -p[1]))
    op = sensitivity_at_specificity(scored(pos, neg), "glaucoma", target)
    assert (op.specificity, op.sensitivity, op.threshold) == want
    assert op.sensitivity == pytest.approx(2 / 3)
    assert op.specificity == 0.75


# -- stratified splits -------------------------------------------------------------------

def origa_shaped_manifest():
    items = [(f"h{i:03d}", "healthy") for i in range(482)]
    items += [(f"g{i:03d}", "glaucoma") for i in range(168)]
    return items


def test_kfold_origa_counts():
    fa = stratified_kfold(origa_shaped_manifest(), 10, seed=77)
    labels = dict(origa_shaped_manifest())
    for fold in range(10):
        ids = fa.fold_ids(fold)
        healthy = sum(1 for i in ids if labels[i] == "healthy")
        glaucoma = len(ids) - healthy
        assert 48 <= healthy <= 49
        assert 16 <= glaucoma <= 17
    assert sorted(fa.assignment) == sorted(labels)


def test_kfold_partition_and_determinism():
    items = origa_shaped_manifest()
    a = stratified_kfold(items, 10, seed=1234)
    b = stratified_kfold(items, 10, seed=1234)
    assert a.assignment == b.assignment
    c = stratified_kfold(items, 10, seed=1235)
    assert c.assignment != a.assignment
    # different seeds, identical per-fold class histograms
    labels = dict(items)
    def histo(fa):
        return sorted(
            tuple(sorted(labels[i] for i in fa.fold_ids(f))) for f in range(10))
    assert histo(a) == histo(c)


def test_kfold_leave_one_out_single_class():
    items = [(f"x{i}", "healthy") for i in range(7)]
    fa = stratified_kfold(items, 7, seed=5)
    assert sorted(len(fa.fold_ids(f)) for f in range(7)) == [1] * 7


def test_kfold_small_class_rejected():
    items = [("a", "healthy"), ("b", "healthy"), ("c", "glaucoma")]
    with pytest.raises(StratificationImpossible):
        stratified_kfold(items, 2, seed=0)


def test_subsample_origa_99():
    split = stratified_subsample(origa_shaped_manifest(), 99, seed=42)
    labels = dict(origa_shaped_manifest())
    train_g = sum(1 for i in split.train if labels[i] == "glaucoma")
    train_h = len(split.train) - train_g
    assert len(split.train) == 99
    assert 25 <= train_g <= 26
    assert 73 <= train_h <= 74
    assert sorted(split.train + split.test) == sorted(labels)
    assert not split.forced_min_per_class


def test_subsample_leave_one_out():
    split = stratified_subsample(origa_shaped_manifest(), 649, seed=9)
    assert len(split.test) == 1


def test_subsample_deterministic():
    a = stratified_subsample(origa_shaped_manifest(), 99, seed=314)
    b = stratified_subsample(origa_shaped_manifest(), 99, seed=314)
    assert a.train == b.train and a.test == b.test


def test_subsample_forces_one_per_class():
    items = [("a", "healthy"), ("b", "healthy"), ("c", "healthy"), ("d", "glaucoma")]
    split = stratified_subsample(items, 1, seed=1)
    assert split.forced_min_per_class
    labels = dict(items)
    assert {labels[i] for i in split.train} == {"healthy", "glaucoma"}
