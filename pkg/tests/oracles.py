"""Independent reference implementations used to verify the library.

Everything here is written straight-line, loop-based, and without sharing
code with the package, so a library bug cannot hide in its own oracle.
"""

from __future__ import annotations

import numpy as np

from weakloc.geometry import Box


def iou_raster(a: Box, b: Box, grid: int = 1000) -> float:
    """IoU by counting grid cells whose centers fall inside each box."""
    centers = (np.arange(grid) + 0.5) / grid
    ax = (centers >= a.x_min) & (centers < a.x_max)
    ay = (centers >= a.y_min) & (centers < a.y_max)
    bx = (centers >= b.x_min) & (centers < b.x_max)
    by = (centers >= b.y_min) & (centers < b.y_max)
    mask_a = np.outer(ay, ax)
    mask_b = np.outer(by, bx)
    union = np.count_nonzero(mask_a | mask_b)
    if union == 0:
        return 0.0
    inter = np.count_nonzero(mask_a & mask_b)
    return inter / union


def _single_pass_box(attention: np.ndarray, delta: float):
    """One generator pass, scalar loops only: normalize, threshold, scan."""
    h, w = attention.shape
    lo = min(attention[r][c] for r in range(h) for c in range(w))
    hi = max(attention[r][c] for r in range(h) for c in range(w))
    if hi <= lo:
        return None
    r_min = c_min = None
    r_max = c_max = None
    for r in range(h):
        for c in range(w):
            normalized = (attention[r][c] - lo) / (hi - lo)
            if normalized > delta:
                if r_min is None or r < r_min:
                    r_min = r
                if r_max is None or r > r_max:
                    r_max = r
                if c_min is None or c < c_min:
                    c_min = c
                if c_max is None or c > c_max:
                    c_max = c
    if r_min is None:
        return None
    return (c_min / w, r_min / h, (c_max + 1) / w, (r_max + 1) / h)


def pseudo_box_oracle(attn_raw: np.ndarray, attn_masked: np.ndarray, delta: float):
    """Straight-line rerun of the two-pass generator on precomputed attention.

    Returns (merged, raw_pass, masked_pass, fallback_used) as coordinate
    tuples, applying the documented fallbacks: empty raw pass -> full image;
    empty masked pass -> raw pass alone.
    """
    full = (0.0, 0.0, 1.0, 1.0)
    raw = _single_pass_box(attn_raw, delta)
    if raw is None:
        return full, full, full, True
    masked = _single_pass_box(attn_masked, delta)
    if masked is None:
        return raw, raw, raw, True
    merged = (
        min(raw[0], masked[0]),
        min(raw[1], masked[1]),
        max(raw[2], masked[2]),
        max(raw[3], masked[3]),
    )
    return merged, raw, masked, False


def warp_box_oracle(box: Box, params, size: int = 256):
    """Rasterize the box, warp the mask pixel by pixel, take the bounding rect.

    The inverse map is recomputed here from the documented forward transform
    (scale about the center, translate, flips), axis by axis with scalar
    arithmetic.  Returns a coordinate tuple or None when the warped mask is
    empty.
    """
    centers = (np.arange(size) + 0.5) / size
    in_x = (centers >= box.x_min) & (centers < box.x_max)
    in_y = (centers >= box.y_min) & (centers < box.y_max)

    def source_index(i, scale, shift, flip):
        x = (i + 0.5) / size
        if flip:
            x = 1.0 - x
        x = x - shift
        x = 0.5 + (x - 0.5) / scale
        return round(x * size - 0.5)

    col_src = [source_index(i, params.scale_x, params.translate_x, params.flip_h) for i in range(size)]
    row_src = [source_index(i, params.scale_y, params.translate_y, params.flip_v) for i in range(size)]
    out_x = np.array([0 <= s < size and bool(in_x[s]) for s in col_src])
    out_y = np.array([0 <= s < size and bool(in_y[s]) for s in row_src])
    cols = np.flatnonzero(out_x)
    rows = np.flatnonzero(out_y)
    if cols.size == 0 or rows.size == 0:
        return None
    return (cols[0] / size, rows[0] / size, (cols[-1] + 1) / size, (rows[-1] + 1) / size)


def evaluate_oracle(records):
    """Scalar-loop reimplementation of the metric aggregation."""

    def iou_scalar(p, g):
        iw = min(p.x_max, g.x_max) - max(p.x_min, g.x_min)
        ih = min(p.y_max, g.y_max) - max(p.y_min, g.y_min)
        inter = max(iw, 0.0) * max(ih, 0.0)
        pa = (p.x_max - p.x_min) * (p.y_max - p.y_min)
        ga = (g.x_max - g.x_min) * (g.y_max - g.y_min)
        union = pa + ga - inter
        if union <= 0:
            return 0.0
        return inter / union

    def topk(dist, label, k):
        ranked = sorted(range(len(dist)), key=lambda i: (-dist[i], i))
        return label in ranked[:k]

    n = len(records)
    gt_known = 0
    top1_loc = top5_loc = 0
    top1_cls = top5_cls = 0
    for r in records:
        loc_ok = max(iou_scalar(r.predicted, g) for g in r.gt_boxes) >= 0.5
        c1 = topk(list(r.pred_dist), r.gt_label, 1)
        c5 = topk(list(r.pred_dist), r.gt_label, 5)
        gt_known += loc_ok
        top1_cls += c1
        top5_cls += c5
        top1_loc += c1 and loc_ok
        top5_loc += c5 and loc_ok
    return {
        "gt_known_acc": gt_known / n,
        "top1_loc_acc": top1_loc / n,
        "top5_loc_acc": top5_loc / n,
        "top1_cls_acc": top1_cls / n,
        "top5_cls_acc": top5_cls / n,
        "n_images": n,
    }


def finite_difference_grad(fn, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function, one coordinate at a time."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn(x)
        flat[i] = orig - step
        lo = fn(x)
        flat[i] = orig
        out[i] = (hi - lo) / (2 * step)
    return grad


def relative_grad_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative disagreement between two gradients."""
    scale = max(float(np.abs(analytic).max()), 1e-8)
    return float(np.abs(analytic - numeric).max()) / scale
