"""Detection AP over description partitions, plus corruption robustness summaries."""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyGroundTruth, EmptyList, ZeroCleanScore
from .geometry import BBox, iou
from .records import Annotation

COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = np.arange(101) / 100.0
_RECALL_EPS = 1e-12  # a recall of exactly 3/10 must reach the 0.3 sample point


class Partition(str, enum.Enum):
    FULL = "FULL"
    PRES = "PRES"
    ABS = "ABS"


@dataclass(frozen=True)
class Prediction:
    image_id: str
    bbox: BBox
    label: int
    score: float

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be finite in [0, 1], got {self.score}")


@dataclass
class EvalSet:
    """Ground truth keyed by image id; labels are ``Annotation.category_id``."""

    ground_truth: Dict[str, Sequence[Annotation]]
    predictions: Sequence[Prediction]

    def __post_init__(self):
        unknown = {p.image_id for p in self.predictions} - set(self.ground_truth)
        if unknown:
            raise ValueError(f"predictions reference unknown images {sorted(unknown)[:5]}")


def _partition_labels(es: EvalSet, partition: Partition):
    """Ground-truth boxes per (label, image) and the label set of the partition."""
    want = {Partition.PRES: "presence", Partition.ABS: "absence"}.get(partition)
    gts: Dict[int, Dict[str, List[BBox]]] = defaultdict(lambda: defaultdict(list))
    for image_id in sorted(es.ground_truth):
        for ann in es.ground_truth[image_id]:
            if want is None or ann.description_type == want:
                gts[ann.category_id][image_id].append(ann.bbox)
    return gts


def match_detections(preds: Sequence[Prediction], gts: Mapping[str, Sequence[BBox]],
                     threshold: float) -> np.ndarray:
    """Greedy one-to-one matching in descending score order; returns TP flags in that order."""
    taken = {k: [False] * len(v) for k, v in gts.items()}
    flags = np.zeros(len(preds), dtype=bool)
    for n, p in enumerate(preds):
        boxes = gts.get(p.image_id, ())
        best, best_iou = -1, threshold
        for j, g in enumerate(boxes):
            if taken[p.image_id][j]:
                continue
            v = iou(p.bbox, g)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = j, v
        if best >= 0:
            taken[p.image_id][best] = True
            flags[n] = True
    return flags


def interpolated_ap(tp_flags: np.ndarray, n_gt: int) -> float:
    """101-point interpolated area under the precision/recall curve."""
    if n_gt == 0:
        raise EmptyGroundTruth("no ground truth for this label")
    if tp_flags.size == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(~tp_flags)
    recall = tp / n_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS - _RECALL_EPS, side="left")
    sampled = np.where(idx < recall.size, envelope[np.minimum(idx, recall.size - 1)], 0.0)
    return float(sampled.mean())


def _sorted_preds(preds: Sequence[Prediction]) -> List[Prediction]:
    return sorted(preds, key=lambda p: -p.score)  # stable: input order breaks ties


def evaluate_ap(es: EvalSet, iou_thresholds: Sequence[float] = COCO_THRESHOLDS,
                partition: Partition = Partition.FULL, *, per_label: bool = False):
    """Mean AP over labels and IoU thresholds for one description partition."""
    partition = Partition(partition)
    if not iou_thresholds or any(not 0 < t <= 1 for t in iou_thresholds):
        raise ValueError("IoU thresholds must lie in (0, 1]")
    gts = _partition_labels(es, partition)
    if not gts:
        raise EmptyGroundTruth(f"no ground truth in partition {partition.value}")
    by_label = defaultdict(list)
    for p in es.predictions:
        if p.label in gts:
            by_label[p.label].append(p)

    label_ap = {}
    for label in sorted(gts):
        preds = _sorted_preds(by_label.get(label, []))
        n_gt = sum(len(v) for v in gts[label].values())
        label_ap[label] = float(np.mean([
            interpolated_ap(match_detections(preds, gts[label], t), n_gt) for t in iou_thresholds
        ]))
    mean = float(np.mean(list(label_ap.values())))
    return (mean, label_ap) if per_label else mean


def pr_curve(es: EvalSet, threshold: float = 0.5,
             partition: Partition = Partition.FULL) -> Tuple[np.ndarray, np.ndarray]:
    """Pooled precision/recall points over every label (for plotting)."""
    gts = _partition_labels(es, Partition(partition))
    flags, scores = [], []
    n_gt = 0
    for label in sorted(gts):
        preds = _sorted_preds([p for p in es.predictions if p.label == label])
        flags.append(match_detections(preds, gts[label], threshold))
        scores.append([p.score for p in preds])
        n_gt += sum(len(v) for v in gts[label].values())
    if n_gt == 0:
        raise EmptyGroundTruth(f"no ground truth in partition {partition}")
    flags = np.concatenate(flags) if flags else np.zeros(0, bool)
    order = np.argsort(-np.concatenate(scores) if scores else np.zeros(0), kind="stable")
    flags = flags[order]
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    with np.errstate(invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 1.0)
    return tp / n_gt, precision


def mfull(full_values: Sequence[float]) -> float:
    """Mean FULL score across corruption types."""
    values = list(full_values)
    if not values:
        raise EmptyList("mfull needs at least one value")
    return float(sum(values) / len(values))


def rfull(mfull_v: float, full_v: float, ndigits: Optional[int] = 1) -> float:
    """Corrupted-to-clean score ratio as a percentage."""
    if full_v <= 0:
        raise ZeroCleanScore(f"clean score must be > 0, got {full_v}")
    value = 100.0 * mfull_v / full_v
    return round(value, ndigits) if ndigits is not None else value
