"""Pseudo-box confidence scoring and consistency-pair assembly.

The confidence of a predicted box is the frozen classifier's maximum class
probability on the raw-image crop inside that box; boxes scoring above the
threshold count as high-quality.  A consistency pair holds a strongly
augmented image together with the identically transformed box prediction,
which serves as a gradient-stopped regression target.

Pair construction is read-only over frozen models, so batches may be built
concurrently with per-worker generators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .augmentation import StrongAugParams, apply_strong, resize_nearest, sample_strong_params
from .geometry import Box, validate_box
from .models import Classifier, Localizer, classify, localize
from .pseudogen import pixel_center_indices

__all__ = [
    "ConfidenceScore",
    "ConsistencyPair",
    "crop_to_box",
    "confidence_of",
    "build_consistency_pair",
    "build_consistency_batch",
    "format_pair_record",
]


@dataclass(frozen=True)
class ConfidenceScore:
    """Maximum class probability assigned to the crop of ``source_box``."""

    value: float
    source_box: Box


@dataclass(frozen=True)
class ConsistencyPair:
    """One refinement sample: S(I) plus the constant target S(Loc(I))."""

    strong_image: np.ndarray
    target_box: Box
    confidence: ConfidenceScore | None
    degenerate: bool
    params: StrongAugParams


def crop_to_box(image, box: Box, out_resolution) -> np.ndarray:
    """Crop the pixel region covered by the normalized box, then resize.

    Pixels belong to the crop when their centers fall inside the box; a
    positive-area box thinner than one pixel keeps the pixel containing its
    center.  ``out_resolution`` is a side length or an (h, w) pair.
    """
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise ValueError(f"expected an image array, got shape {np.shape(image)}")
    validate_box(box)
    if box.is_degenerate:
        raise ValueError(f"cannot crop a degenerate box: {box.as_tuple()}")
    h, w = img.shape[:2]
    rows = pixel_center_indices(h, box.y_min, box.y_max)
    cols = pixel_center_indices(w, box.x_min, box.x_max)
    if rows.size == 0:
        rows = np.array([min(h - 1, max(0, int((box.y_min + box.y_max) / 2 * h)))])
    if cols.size == 0:
        cols = np.array([min(w - 1, max(0, int((box.x_min + box.x_max) / 2 * w)))])
    region = img[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    if isinstance(out_resolution, int):
        out_h = out_w = out_resolution
    else:
        out_h, out_w = out_resolution
    return resize_nearest(region, out_h, out_w)


def confidence_of(
    classifier: Classifier,
    image,
    box: Box,
    input_size: int | None = None,
) -> ConfidenceScore:
    """Score a box by classification discrimination of its raw-image crop.

    Degenerate boxes score 0 by convention and are never retained.  The crop
    is resized to ``input_size`` (the image's own size when omitted).
    """
    if box.is_degenerate:
        return ConfidenceScore(0.0, box)
    if input_size is None:
        input_size = int(np.asarray(image).shape[0])
    crop = crop_to_box(image, box, input_size)
    probs = classify(classifier, crop)
    return ConfidenceScore(float(probs.max()), box)


def build_consistency_pair(
    localizer: Localizer,
    image,
    rng: np.random.Generator,
    classifier: Classifier | None = None,
    params: StrongAugParams | None = None,
    input_size: int | None = None,
    param_sampler: Callable[[np.random.Generator], StrongAugParams] = sample_strong_params,
) -> ConsistencyPair:
    """Predict a box in inference mode, sample one strong transform, and apply
    it to image and prediction alike.

    The prediction is clipped before use (the confidence crop needs a physical
    region).  Confidence is filled only when a classifier is supplied; it is
    always computed on the raw image, never the augmented one.
    """
    pred = localize(localizer, image)
    if params is None:
        params = param_sampler(rng)
    confidence = None
    if classifier is not None:
        confidence = confidence_of(classifier, image, pred, input_size)
    if pred.is_degenerate:
        strong_image = apply_strong(image, Box(0.0, 0.0, 1.0, 1.0), params)[0]
        return ConsistencyPair(strong_image, pred, confidence, True, params)
    strong_image, target_box = apply_strong(image, pred, params)
    return ConsistencyPair(
        strong_image, target_box, confidence, target_box.is_degenerate, params
    )


def build_consistency_batch(
    localizer: Localizer,
    classifier: Classifier,
    images: Sequence[np.ndarray],
    rng: np.random.Generator,
    input_size: int,
    param_sampler: Callable[[np.random.Generator], StrongAugParams] = sample_strong_params,
) -> list[ConsistencyPair]:
    """Batched equivalent of :func:`build_consistency_pair`.

    The localizer and classifier each run once over the whole batch; the
    per-sample transform draws happen in batch order, so results match the
    per-image path up to floating-point batching effects.
    """
    preds = localize(localizer, np.stack(list(images)))
    params_list = [param_sampler(rng) for _ in images]

    crops = []
    crop_owner = []
    for i, (img, pred) in enumerate(zip(images, preds)):
        if not pred.is_degenerate:
            crops.append(crop_to_box(img, pred, input_size))
            crop_owner.append(i)
    conf_values = np.zeros(len(preds), dtype=np.float64)
    if crops:
        probs = classify(classifier, np.stack(crops))
        conf_values[crop_owner] = probs.max(axis=1)

    pairs = []
    for img, pred, params, conf in zip(images, preds, params_list, conf_values):
        confidence = ConfidenceScore(float(conf), pred)
        if pred.is_degenerate:
            strong_image = apply_strong(img, Box(0.0, 0.0, 1.0, 1.0), params)[0]
            pairs.append(ConsistencyPair(strong_image, pred, confidence, True, params))
            continue
        strong_image, target_box = apply_strong(img, pred, params)
        pairs.append(
            ConsistencyPair(strong_image, target_box, confidence, target_box.is_degenerate, params)
        )
    return pairs


def format_pair_record(image_id: str, predicted: Box, pair: ConsistencyPair, retained: bool) -> str:
    """Debug-dump line: prediction, transform, target, confidence, retention."""
    pred = ",".join(f"{v:.6f}" for v in predicted.as_tuple())
    target = ",".join(f"{v:.6f}" for v in pair.target_box.as_tuple())
    p = pair.params
    params = (
        f"scale=({p.scale_x:.4f},{p.scale_y:.4f}) translate=({p.translate_x:.4f},"
        f"{p.translate_y:.4f}) flips=({int(p.flip_h)},{int(p.flip_v)})"
    )
    conf = "-" if pair.confidence is None else f"{pair.confidence.value:.6f}"
    return (
        f"{image_id} pred=[{pred}] {params} target=[{target}] "
        f"confidence={conf} retained={int(retained)} degenerate={int(pair.degenerate)}"
    )
