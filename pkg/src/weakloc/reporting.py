"""Metric reports as delimited text with figures rendered alongside.

``write_report`` emits the structured text file (metric name, value to four
decimals, image count) and drops a PNG next to it: a metric bar chart plus
the per-image best-IoU histogram.  ``render_sample`` draws one image with
its predicted box (blue) and ground-truth boxes (red) overlaid.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import patches

from .evaluation import IOU_THRESHOLD, EvalRecord, MetricsReport, gt_known_correct, topk_correct
from .geometry import Box, iou

__all__ = ["format_report", "write_report", "write_per_image", "report_figure", "render_sample"]


def format_report(report: MetricsReport) -> str:
    lines = ["metric,value"]
    for f in fields(MetricsReport):
        value = getattr(report, f.name)
        if f.name == "n_images":
            lines.append(f"{f.name},{value}")
        else:
            lines.append(f"{f.name},{value:.4f}")
    return "\n".join(lines) + "\n"


def write_report(
    report: MetricsReport,
    path,
    records: Sequence[EvalRecord] | None = None,
    figure: bool = True,
) -> Path:
    """Write the delimited report; when records are given also render the
    companion figure to ``<path stem>.png``.  Returns the report path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report), encoding="utf-8")
    if figure and records is not None:
        report_figure(report, records, path.with_suffix(".png"))
    return path


def write_per_image(records: Sequence[EvalRecord], path) -> Path:
    """Debug listing: one line per image with IoU and correctness flags."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["image_id,best_iou,gt_known,top1,x_min,y_min,x_max,y_max"]
    for r in records:
        best = max(iou(r.predicted, g) for g in r.gt_boxes)
        loc_ok = int(gt_known_correct(r.predicted, r.gt_boxes))
        top1 = int(topk_correct(r.pred_dist, r.gt_label, 1))
        coords = ",".join(f"{v:.6f}" for v in r.predicted.as_tuple())
        lines.append(f"{r.image_id},{best:.4f},{loc_ok},{top1},{coords}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def report_figure(report: MetricsReport, records: Sequence[EvalRecord], path) -> Path:
    """Two panels: metric bars and the distribution of per-image best IoU."""
    best_ious = [max(iou(r.predicted, g) for g in r.gt_boxes) for r in records]
    names = ["gt_known", "top1_loc", "top5_loc", "top1_cls", "top5_cls"]
    values = [
        report.gt_known_acc,
        report.top1_loc_acc,
        report.top5_loc_acc,
        report.top1_cls_acc,
        report.top5_cls_acc,
    ]
    fig, (ax_bar, ax_hist) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_bar.bar(names, values, color="steelblue")
    ax_bar.set_ylim(0, 1)
    ax_bar.set_ylabel("accuracy")
    ax_bar.set_title(f"metrics over {report.n_images} images")
    ax_bar.tick_params(axis="x", rotation=30)
    ax_hist.hist(best_ious, bins=np.linspace(0, 1, 21), color="gray")
    ax_hist.axvline(IOU_THRESHOLD, color="crimson", linestyle="--", label="correct at 0.5")
    ax_hist.set_xlabel("best IoU vs ground truth")
    ax_hist.set_ylabel("images")
    ax_hist.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _add_box(ax, box: Box, h: int, w: int, color: str, label: str | None) -> None:
    rect = patches.Rectangle(
        (box.x_min * w, box.y_min * h),
        box.width * w,
        box.height * h,
        linewidth=2,
        edgecolor=color,
        facecolor="none",
        label=label,
    )
    ax.add_patch(rect)


def render_sample(
    image: np.ndarray,
    predicted: Box | None,
    gt_boxes: Sequence[Box] | None,
    path,
    title: str = "",
) -> Path:
    """Overlay the predicted box (blue) and ground truth (red) on one image."""
    h, w = image.shape[:2]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(image)
    if predicted is not None:
        _add_box(ax, predicted, h, w, "tab:blue", "predicted")
    if gt_boxes:
        for i, g in enumerate(gt_boxes):
            _add_box(ax, g, h, w, "crimson", "ground truth" if i == 0 else None)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_axis_off()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
