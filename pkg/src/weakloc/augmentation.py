"""Geometric augmentation applied jointly to images and boxes.

Two flavors.  General augmentation (resize, random crop, horizontal flip)
prepares every network input.  Strong augmentation (per-axis scale about
the image center, axis-wise translation with zero-fill, horizontal and
vertical flips) produces the perturbed views used for consistency
training.  One parameter object describes one sampled transform, and the
same affine map is applied to the pixels and to any box, so box
supervision survives the warp.

Composition order is fixed: scale, then translate, then flips.  Pixel
resampling is nearest-neighbor, keeping results exactly reproducible, and
regions mapped from outside the frame are zero-filled.  All functions are
pure given explicit params; the random source is owned by the caller (one
seeded generator per worker).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box, clip, validate_box

__all__ = [
    "SCALE_RANGE",
    "TRANSLATE_LIMIT",
    "TRANSLATE_PROB",
    "FLIP_PROB",
    "DEFAULT_CROP_RATIO",
    "StrongAugParams",
    "GeneralAugParams",
    "sample_strong_params",
    "sample_general_params",
    "center_general_params",
    "transform_box",
    "apply_strong",
    "apply_general",
    "invert_general",
    "resize_nearest",
]

SCALE_RANGE = (0.8, 1.2)
TRANSLATE_LIMIT = 0.25
TRANSLATE_PROB = 0.5
FLIP_PROB = 0.5
DEFAULT_CROP_RATIO = 0.875  # 448/512, preserved at desk scale (64 -> 56)


@dataclass(frozen=True)
class StrongAugParams:
    """One sampled strong transform; translations are fractions of the frame."""

    scale_x: float
    scale_y: float
    translate_x: float
    translate_y: float
    translate_active: bool
    flip_h: bool
    flip_v: bool

    @classmethod
    def identity(cls) -> "StrongAugParams":
        return cls(1.0, 1.0, 0.0, 0.0, False, False, False)


@dataclass(frozen=True)
class GeneralAugParams:
    """Crop position (in pre-crop pixels) and horizontal flip choice."""

    crop_offset_x: int
    crop_offset_y: int
    flip_h: bool


def sample_strong_params(
    rng: np.random.Generator,
    scale_range: tuple[float, float] = SCALE_RANGE,
    translate_limit: float = TRANSLATE_LIMIT,
    translate_prob: float = TRANSLATE_PROB,
    flip_prob: float = FLIP_PROB,
) -> StrongAugParams:
    """Draw scales uniformly per axis, translation with its own coin, flips
    independently per direction.  Inactive translation pins both shifts to 0."""
    scale_x = float(rng.uniform(scale_range[0], scale_range[1]))
    scale_y = float(rng.uniform(scale_range[0], scale_range[1]))
    active = bool(rng.random() < translate_prob)
    if active:
        translate_x = float(rng.uniform(-translate_limit, translate_limit))
        translate_y = float(rng.uniform(-translate_limit, translate_limit))
    else:
        translate_x = translate_y = 0.0
    flip_h = bool(rng.random() < flip_prob)
    flip_v = bool(rng.random() < flip_prob)
    return StrongAugParams(scale_x, scale_y, translate_x, translate_y, active, flip_h, flip_v)


def sample_general_params(
    rng: np.random.Generator,
    pre_crop_size: int,
    crop_size: int,
    flip_prob: float = FLIP_PROB,
) -> GeneralAugParams:
    span = pre_crop_size - crop_size
    if span < 0:
        raise ValueError(f"crop size {crop_size} exceeds pre-crop size {pre_crop_size}")
    ox = int(rng.integers(0, span + 1))
    oy = int(rng.integers(0, span + 1))
    return GeneralAugParams(ox, oy, bool(rng.random() < flip_prob))


def center_general_params(pre_crop_size: int, crop_size: int) -> GeneralAugParams:
    """Deterministic evaluation transform: centered crop, no flip."""
    if pre_crop_size < crop_size:
        raise ValueError(f"crop size {crop_size} exceeds pre-crop size {pre_crop_size}")
    off = (pre_crop_size - crop_size) // 2
    return GeneralAugParams(off, off, False)


def _fwd_coord(x: float, scale: float, shift: float, flip: bool) -> float:
    # identity components leave the float untouched so identity params are exact
    if scale != 1.0:
        x = 0.5 + (x - 0.5) * scale
    if shift != 0.0:
        x = x + shift
    if flip:
        x = 1.0 - x
    return x


def _src_pixel_indices(n: int, scale: float, shift: float, flip: bool):
    """Nearest source index per output pixel for one axis of the inverse map.

    Works in pixel units (center of pixel i sits at i + 0.5) so identity
    params reproduce indices exactly.
    """
    u = np.arange(n) + 0.5
    if flip:
        u = n - u
    if shift != 0.0:
        u = u - shift * n
    if scale != 1.0:
        u = 0.5 * n + (u - 0.5 * n) / scale
    src = np.rint(u - 0.5).astype(np.int64)
    valid = (src >= 0) & (src < n)
    return src, valid


def _warp_image(image: np.ndarray, params: StrongAugParams) -> np.ndarray:
    h, w = image.shape[:2]
    src_c, ok_c = _src_pixel_indices(w, params.scale_x, params.translate_x, params.flip_h)
    src_r, ok_r = _src_pixel_indices(h, params.scale_y, params.translate_y, params.flip_v)
    out = np.zeros_like(image)
    rr = np.flatnonzero(ok_r)
    cc = np.flatnonzero(ok_c)
    if rr.size and cc.size:
        out[np.ix_(rr, cc)] = image[np.ix_(src_r[rr], src_c[cc])]
    return out


def transform_box(box: Box, params: StrongAugParams) -> Box:
    """Map box corners through the strong-augmentation affine and clip."""
    xs = sorted(
        (
            _fwd_coord(box.x_min, params.scale_x, params.translate_x, params.flip_h),
            _fwd_coord(box.x_max, params.scale_x, params.translate_x, params.flip_h),
        )
    )
    ys = sorted(
        (
            _fwd_coord(box.y_min, params.scale_y, params.translate_y, params.flip_v),
            _fwd_coord(box.y_max, params.scale_y, params.translate_y, params.flip_v),
        )
    )
    return clip(Box(xs[0], ys[0], xs[1], ys[1]))


def apply_strong(image, box: Box, params: StrongAugParams) -> tuple[np.ndarray, Box]:
    """Warp pixels and box with the same affine map.

    The output box is clipped to [0, 1]; content pushed fully out of frame
    comes back degenerate and the caller skips the sample.
    """
    validate_box(box)
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise ValueError(f"expected an image array, got shape {np.shape(image)}")
    return _warp_image(img, params), transform_box(box, params)


def resize_nearest(image, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize; exact copy when sizes already match."""
    img = np.asarray(image)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    rows = np.clip(((np.arange(out_h) + 0.5) * (h / out_h)).astype(np.int64), 0, h - 1)
    cols = np.clip(((np.arange(out_w) + 0.5) * (w / out_w)).astype(np.int64), 0, w - 1)
    return img[np.ix_(rows, cols)]


def apply_general(
    image,
    box: Box | None,
    params: GeneralAugParams,
    pre_crop_size: int,
    crop_size: int,
) -> tuple[np.ndarray, Box | None]:
    """Resize to the pre-crop resolution, crop the training window, flip.

    A supplied box undergoes the same coordinate map and clipping; a box
    fully outside the crop comes back degenerate.
    """
    ox, oy = params.crop_offset_x, params.crop_offset_y
    if min(ox, oy) < 0 or max(ox, oy) + crop_size > pre_crop_size:
        raise ValueError(
            f"crop window ({ox}, {oy}) + {crop_size} exceeds pre-crop size {pre_crop_size}"
        )
    resized = resize_nearest(image, pre_crop_size, pre_crop_size)
    out = resized[oy : oy + crop_size, ox : ox + crop_size]
    if params.flip_h:
        out = out[:, ::-1]
    out = np.ascontiguousarray(out)
    if box is None:
        return out, None
    validate_box(box)
    x0 = (box.x_min * pre_crop_size - ox) / crop_size
    x1 = (box.x_max * pre_crop_size - ox) / crop_size
    y0 = (box.y_min * pre_crop_size - oy) / crop_size
    y1 = (box.y_max * pre_crop_size - oy) / crop_size
    if params.flip_h:
        x0, x1 = 1.0 - x1, 1.0 - x0
    return out, clip(Box(x0, y0, x1, y1))


def invert_general(
    box: Box,
    params: GeneralAugParams,
    pre_crop_size: int,
    crop_size: int,
) -> Box:
    """Map a box in crop coordinates back to the pre-resize image frame."""
    validate_box(box)
    x0, x1 = box.x_min, box.x_max
    if params.flip_h:
        x0, x1 = 1.0 - x1, 1.0 - x0
    ox, oy = params.crop_offset_x, params.crop_offset_y
    return Box(
        (x0 * crop_size + ox) / pre_crop_size,
        (box.y_min * crop_size + oy) / pre_crop_size,
        (x1 * crop_size + ox) / pre_crop_size,
        (box.y_max * crop_size + oy) / pre_crop_size,
    )
