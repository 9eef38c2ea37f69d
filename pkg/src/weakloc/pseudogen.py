"""Mask-based pseudo bounding box generation from feature-map attention.

The generator makes two passes over one image.  The channel-mean attention
of the raw image is min-max normalized and thresholded, and the tight
rectangle around the surviving cells becomes the first discriminative
region.  That region is zeroed out of the raw pixels, and a second pass
over the masked image finds a complementary region.  The union of the two
rectangles is the pseudo box used as a regression target.

The feature extractor is any callable mapping an 8-bit RGB image of shape
(height, width, 3) to a finite float stack of shape (channels, height,
width).  Generation holds no state of its own, so concurrent calls are
safe whenever the extractor's inference is (the extractor must say so).

Fallbacks when a pass finds no foreground: an empty raw pass emits the
full-image box, an empty masked pass emits the raw-pass box alone; both
set ``fallback_used``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .geometry import FULL_IMAGE, Box, clip, union_box

__all__ = [
    "NoForegroundError",
    "PseudoLabel",
    "channel_mean",
    "binarize",
    "foreground_box",
    "pixel_center_indices",
    "mask_out",
    "attention_region",
    "generate_pseudo_box",
    "write_pseudo_labels",
    "read_pseudo_labels",
]


class NoForegroundError(ValueError):
    """Raised when a binary mask holds no foreground cells."""


@dataclass(frozen=True)
class PseudoLabel:
    """Merged pseudo box plus the per-pass regions that produced it.

    ``merged`` equals the (clipped) union of ``raw_pass`` and
    ``masked_pass`` whenever ``fallback_used`` is False.
    """

    merged: Box
    raw_pass: Box
    masked_pass: Box
    fallback_used: bool


def channel_mean(features) -> np.ndarray:
    """Average a (channels, height, width) stack over the channel axis."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3 or min(feats.shape) < 1:
        raise ValueError(
            f"expected a (channels, height, width) stack, got shape {np.shape(features)}"
        )
    if not np.all(np.isfinite(feats)):
        raise ValueError("feature stack contains non-finite values")
    return feats.mean(axis=0)


def binarize(attention, delta: float) -> np.ndarray:
    """Min-max normalize the map to [0, 1] and keep cells strictly above delta.

    A constant map normalizes to nothing and yields an all-background mask
    (the degenerate-map signal); any non-constant map keeps at least its
    maximum cell because the normalized maximum is 1 > delta.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    attn = np.asarray(attention, dtype=np.float64)
    if attn.ndim != 2 or min(attn.shape) < 1:
        raise ValueError(f"expected a 2-d attention map, got shape {np.shape(attention)}")
    if not np.all(np.isfinite(attn)):
        raise ValueError("attention map contains non-finite values")
    lo = attn.min()
    hi = attn.max()
    if hi <= lo:
        return np.zeros(attn.shape, dtype=bool)
    return (attn - lo) / (hi - lo) > delta


def foreground_box(mask) -> Box:
    """Tight rectangle around all foreground cells, in normalized coordinates.

    Grid cells map to image space by cell boundaries: a foreground span of
    rows [r0..r1] and cols [c0..c1] on an H x W grid becomes
    (c0/W, r0/H, (c1+1)/W, (r1+1)/H).
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d mask, got shape {np.shape(mask)}")
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    if rows.size == 0:
        raise NoForegroundError("mask has no foreground cells")
    h, w = m.shape
    return Box(
        float(cols[0]) / w,
        float(rows[0]) / h,
        float(cols[-1] + 1) / w,
        float(rows[-1] + 1) / h,
    )


def pixel_center_indices(n: int, lo: float, hi: float) -> np.ndarray:
    """Indices i whose pixel centers (i + 0.5)/n fall in [lo, hi)."""
    centers = (np.arange(n) + 0.5) / n
    return np.flatnonzero((centers >= lo) & (centers < hi))


def mask_out(image, box: Box) -> np.ndarray:
    """Copy of the image with pixels whose centers fall inside the box zeroed.

    Operates on raw pixel values, before any normalization a model applies.
    A degenerate box leaves the copy untouched and warns.
    """
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise ValueError(f"expected an image array, got shape {np.shape(image)}")
    out = img.copy()
    if box.is_degenerate:
        warnings.warn("mask_out received a degenerate box; image returned unchanged")
        return out
    h, w = img.shape[:2]
    rows = pixel_center_indices(h, box.y_min, box.y_max)
    cols = pixel_center_indices(w, box.x_min, box.x_max)
    if rows.size and cols.size:
        out[np.ix_(rows, cols)] = 0
    return out


def attention_region(features, delta: float) -> Box | None:
    """One generator pass: attention, threshold, tight rectangle.

    Returns None when the thresholded mask is empty (constant attention).
    """
    mask = binarize(channel_mean(features), delta)
    try:
        return foreground_box(mask)
    except NoForegroundError:
        return None


def generate_pseudo_box(image, extractor: Callable, delta: float) -> PseudoLabel:
    """Run the full two-pass generator on one image.

    The extractor is called once on the raw image and, unless the raw pass
    came back empty, once more on the masked image.  The returned label's
    ``merged`` box is always valid and clipped to [0, 1].
    """
    raw_region = attention_region(extractor(image), delta)
    if raw_region is None:
        return PseudoLabel(FULL_IMAGE, FULL_IMAGE, FULL_IMAGE, True)
    masked = mask_out(image, raw_region)
    masked_region = attention_region(extractor(masked), delta)
    if masked_region is None:
        return PseudoLabel(clip(raw_region), raw_region, raw_region, True)
    merged = clip(union_box(raw_region, masked_region))
    return PseudoLabel(merged, raw_region, masked_region, False)


def write_pseudo_labels(path, rows: Iterable[tuple[str, Box, bool]]) -> None:
    """Dump records as ``image_id,x_min,y_min,x_max,y_max,fallback_flag`` lines.

    Coordinates carry six decimal digits; the flag is 0 or 1.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, box, fallback in rows:
            coords = ",".join(f"{v:.6f}" for v in box.as_tuple())
            fh.write(f"{image_id},{coords},{int(bool(fallback))}\n")


def read_pseudo_labels(path) -> list[tuple[str, Box, bool]]:
    """Inverse of :func:`write_pseudo_labels`."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            out.append((parts[0], Box.from_seq(parts[1:5]), bool(int(parts[5]))))
    return out
