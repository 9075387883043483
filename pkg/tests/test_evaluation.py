import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgshift.errors import EmptyGroundTruth, EmptyList, ZeroCleanScore
from bgshift.evaluation import (COCO_THRESHOLDS, EvalSet, Partition, Prediction, evaluate_ap,
                                interpolated_ap, mfull, pr_curve, rfull)
from bgshift.fixtures import noisy_predictions, perfect_predictions
from bgshift.geometry import BBox
from bgshift.records import Annotation

from oracles import brute_force_ap, enumerate_ap

GT_BOX = BBox(0, 0, 100, 100)
TP_BOX = BBox(0, 0, 100, 90)  # IoU 0.9
FP_BOX = BBox(300, 300, 20, 20)


def single_gt():
    return {"im": [Annotation(GT_BOX, 0, description_type="presence")]}


def to_plain(es):
    gt = {k: [(a.category_id, tuple(a.bbox.as_list())) for a in v] for k, v in es.ground_truth.items()}
    preds = [(p.image_id, p.label, tuple(p.bbox.as_list()), p.score) for p in es.predictions]
    return gt, preds


def test_thresholds():
    assert COCO_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def test_perfect_and_empty(corpus):
    images = [img for img, _ in corpus]
    gt = {img.source_id: list(img.annotations) for img in images}
    for part in Partition:
        assert evaluate_ap(EvalSet(gt, perfect_predictions(images)), partition=part) == 1.0
        assert evaluate_ap(EvalSet(gt, []), partition=part) == 0.0


def test_tp_then_fp():
    preds = [Prediction("im", TP_BOX, 0, 0.9), Prediction("im", FP_BOX, 0, 0.8)]
    assert evaluate_ap(EvalSet(single_gt(), preds), [0.5]) == 1.0


def test_fp_then_tp_matches_enumeration():
    preds = [Prediction("im", TP_BOX, 0, 0.8), Prediction("im", FP_BOX, 0, 0.9)]
    es = EvalSet(single_gt(), preds)
    value = evaluate_ap(es, [0.5])
    assert value == pytest.approx(enumerate_ap([False, True], 1), abs=1e-12)
    assert value == pytest.approx(0.5, abs=1e-12)


def test_duplicate_predictions_count_as_false_positives():
    preds = [Prediction("im", TP_BOX, 0, 0.9), Prediction("im", TP_BOX, 0, 0.8)]
    assert evaluate_ap(EvalSet(single_gt(), preds), [0.5]) == 1.0
    # the second match is a false positive; at threshold 0.95 neither matches
    assert evaluate_ap(EvalSet(single_gt(), preds), [0.95]) == 0.0


def test_interpolated_ap_against_enumeration(rng):
    for _ in range(200):
        n = int(rng.integers(1, 15))
        flags = rng.random(n) < 0.5
        n_gt = int(flags.sum() + rng.integers(0, 4)) or 1
        assert interpolated_ap(flags, n_gt) == pytest.approx(enumerate_ap(flags.tolist(), n_gt), abs=1e-12)


def small_sets(corpus, seed):
    """Fixtures of at most five images and ten boxes."""
    out = []
    for start in range(0, 20, 5):
        imgs = [img for img, _ in corpus[start:start + 5]]
        while sum(len(i.annotations) for i in imgs) > 10:
            imgs.pop()
        gt = {i.source_id: list(i.annotations) for i in imgs}
        out.append(EvalSet(gt, noisy_predictions(imgs, seed=seed)))
    return out


def test_brute_force_equivalence(corpus):
    for seed in range(5):
        for es in small_sets(corpus, seed):
            gt, preds = to_plain(es)
            expected = brute_force_ap(gt, preds, COCO_THRESHOLDS)
            assert evaluate_ap(es) == pytest.approx(expected, rel=1e-6, abs=1e-12)


def test_partitions_restrict_ground_truth(corpus):
    images = [img for img, _ in corpus]
    gt = {i.source_id: list(i.annotations) for i in images}
    es = EvalSet(gt, noisy_predictions(images, seed=1))
    _, preds = to_plain(es)
    for part, want in ((Partition.PRES, "presence"), (Partition.ABS, "absence")):
        sub = {k: [(a.category_id, tuple(a.bbox.as_list())) for a in v if a.description_type == want]
               for k, v in gt.items()}
        labels = sorted({lab for v in sub.values() for lab, _ in v})
        expected = brute_force_ap(sub, [p for p in preds if p[1] in labels], COCO_THRESHOLDS, labels)
        assert evaluate_ap(es, partition=part) == pytest.approx(expected, rel=1e-6)


def test_empty_partition_raises():
    gt = {"im": [Annotation(GT_BOX, 0, description_type="presence")]}
    with pytest.raises(EmptyGroundTruth):
        evaluate_ap(EvalSet(gt, []), partition=Partition.ABS)


def test_duplicated_dataset_same_ap(corpus):
    images = [img for img, _ in corpus]
    gt = {i.source_id: list(i.annotations) for i in images}
    preds = noisy_predictions(images, seed=4)
    gt2 = dict(gt)
    preds2 = list(preds)
    for k, v in gt.items():
        gt2[k + "_dup"] = v
    preds2 += [Prediction(p.image_id + "_dup", p.bbox, p.label, p.score) for p in preds]
    # scores are continuous, so each score now appears twice in a row; the interpolated
    # curve is unchanged by the duplication
    assert evaluate_ap(EvalSet(gt2, preds2)) == pytest.approx(evaluate_ap(EvalSet(gt, preds)), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.floats(0.01, 0.99)), min_size=1, max_size=8), st.integers(0, 3))
def test_ap_monotonicity(items, spare):
    gt_boxes = [BBox(40 * i, 0, 30, 30) for i in range(len(items) + spare + 1)]
    gt = {"im": [Annotation(b, 0) for b in gt_boxes]}
    preds = []
    for i, (hit, score) in enumerate(items):
        box = gt_boxes[i] if hit else BBox(40 * i, 200, 30, 30)
        preds.append(Prediction("im", box, 0, score))
    base = evaluate_ap(EvalSet(gt, preds))
    assert 0.0 <= base <= 1.0
    with_tp = preds + [Prediction("im", gt_boxes[-1], 0, 1.0)]
    assert evaluate_ap(EvalSet(gt, with_tp)) >= base - 1e-12
    with_fp = preds + [Prediction("im", BBox(0, 400, 10, 10), 0, 0.0)]
    assert evaluate_ap(EvalSet(gt, with_fp)) <= base + 1e-9


def test_pr_curve_endpoints(corpus):
    images = [img for img, _ in corpus]
    gt = {i.source_id: list(i.annotations) for i in images}
    recall, precision = pr_curve(EvalSet(gt, perfect_predictions(images)))
    assert recall[-1] == 1.0 and (precision == 1.0).all()


def test_mfull():
    assert mfull([10, 20, 30, 40]) == 25
    assert mfull([7.5]) == 7.5
    with pytest.raises(EmptyList):
        mfull([])


@pytest.mark.parametrize("m,f,expected", [
    (13.6, 19.1, 71.2), (21.7, 30.0, 72.3), (16.7, 22.7, 73.6), (27.5, 37.6, 73.1),
])
def test_rfull_published_rows(m, f, expected):
    assert rfull(m, f) == expected


def test_rfull_identity_and_errors():
    assert rfull(12.3, 12.3) == 100.0
    with pytest.raises(ZeroCleanScore):
        rfull(1.0, 0.0)


@given(st.lists(st.floats(0.1, 100), min_size=1, max_size=5), st.floats(0.1, 100), st.floats(0.01, 100))
def test_rfull_scale_invariant(xs, f, c):
    a = rfull(mfull(xs), f, None)
    b = rfull(mfull([x * c for x in xs]), f * c, None)
    assert b == pytest.approx(a, rel=1e-9)


def test_prediction_score_range():
    with pytest.raises(ValueError):
        Prediction("im", GT_BOX, 0, 1.5)
