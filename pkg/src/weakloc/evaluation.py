"""Localization metrics: GT-Known and Top-1/Top-5 accuracy.

A prediction is GT-Known correct when its IoU with ANY ground-truth box of
the image reaches 0.5 (inclusive).  Top-k localization is the conjunction
of top-k classification and GT-Known.  Aggregation is a pure reduction
over records, permutation-invariant and parallelizable per record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box, iou

__all__ = [
    "IOU_THRESHOLD",
    "EvalRecord",
    "MetricsReport",
    "gt_known_correct",
    "topk_correct",
    "evaluate",
]

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class EvalRecord:
    """One scored image: prediction, class distribution, ground truth."""

    image_id: str
    predicted: Box
    pred_dist: np.ndarray
    gt_boxes: tuple[Box, ...]
    gt_label: int


@dataclass(frozen=True)
class MetricsReport:
    gt_known_acc: float
    top1_loc_acc: float
    top5_loc_acc: float
    top1_cls_acc: float
    top5_cls_acc: float
    n_images: int


def gt_known_correct(pred: Box, gt_boxes: Sequence[Box]) -> bool:
    """True iff max over ground-truth boxes of iou(pred, gt) >= 0.5.

    Multi-box images count as correct on ANY match.  Zero-area predictions
    always score IoU 0 and therefore fail.
    """
    boxes = list(gt_boxes)
    if not boxes:
        raise ValueError("gt_boxes must be non-empty")
    return max(iou(pred, g) for g in boxes) >= IOU_THRESHOLD


def topk_correct(pred_dist, gt_label: int, k: int) -> bool:
    """True iff the label sits among the k highest-probability classes.

    Ties are broken deterministically in favor of the lower class index.
    """
    dist = np.asarray(pred_dist, dtype=np.float64)
    if dist.ndim != 1:
        raise ValueError(f"expected a 1-d distribution, got shape {dist.shape}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > dist.shape[0]:
        raise ValueError(f"k={k} exceeds the number of classes {dist.shape[0]}")
    order = np.lexsort((np.arange(dist.shape[0]), -dist))
    return int(gt_label) in order[:k]


def evaluate(records: Sequence[EvalRecord], k_values: tuple[int, ...] = (1, 5)) -> MetricsReport:
    """Aggregate GT-Known, classification, and joint localization accuracy."""
    recs = list(records)
    if not recs:
        raise ValueError("records must be non-empty")
    if 1 not in k_values or 5 not in k_values:
        raise ValueError(f"k_values must include 1 and 5, got {k_values}")
    loc_ok = np.array([gt_known_correct(r.predicted, r.gt_boxes) for r in recs])
    cls_ok = {
        k: np.array([topk_correct(r.pred_dist, r.gt_label, k) for r in recs]) for k in k_values
    }
    n = len(recs)
    return MetricsReport(
        gt_known_acc=float(loc_ok.mean()),
        top1_loc_acc=float((cls_ok[1] & loc_ok).mean()),
        top5_loc_acc=float((cls_ok[5] & loc_ok).mean()),
        top1_cls_acc=float(cls_ok[1].mean()),
        top5_cls_acc=float(cls_ok[5].mean()),
        n_images=n,
    )
