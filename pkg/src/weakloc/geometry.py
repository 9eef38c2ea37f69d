"""Axis-aligned box algebra in normalized image coordinates.

Boxes are corner-format rectangles (x_min, y_min, x_max, y_max) with the
full image spanning (0, 0, 1, 1): origin at the top-left corner, x growing
rightward, y growing downward.  All operations are pure functions of their
inputs and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Box",
    "InvalidBoxError",
    "FULL_IMAGE",
    "validate_box",
    "iou",
    "union_box",
    "clip",
    "area",
]


class InvalidBoxError(ValueError):
    """A box with negative extent or non-finite coordinates was rejected."""


@dataclass(frozen=True)
class Box:
    """Rectangle in normalized coordinates.

    Zero-area boxes are representable (training can transiently emit them)
    but flagged through :attr:`is_degenerate`; downstream metrics score them
    as IoU 0.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def is_degenerate(self) -> bool:
        """True when the box encloses zero area; callers must handle these."""
        return self.width <= 0.0 or self.height <= 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        """Serialization order: x_min, y_min, x_max, y_max."""
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @classmethod
    def from_seq(cls, seq) -> "Box":
        x0, y0, x1, y1 = (float(v) for v in seq)
        return cls(x0, y0, x1, y1)


FULL_IMAGE = Box(0.0, 0.0, 1.0, 1.0)


def validate_box(box: Box) -> None:
    """Raise :class:`InvalidBoxError` unless the box has non-negative extent."""
    vals = box.as_tuple()
    if not all(math.isfinite(v) for v in vals):
        raise InvalidBoxError(f"non-finite box coordinates: {vals}")
    if box.x_min > box.x_max or box.y_min > box.y_max:
        raise InvalidBoxError(f"box has negative extent: {vals}")


def area(box: Box) -> float:
    """(x_max - x_min) * (y_max - y_min) for a valid box."""
    validate_box(box)
    return box.width * box.height


def iou(a: Box, b: Box) -> float:
    """Intersection over union with continuous-area semantics.

    Boxes sharing only an edge intersect with area zero; a zero-area union
    (two identical degenerate boxes) yields 0 by convention.
    """
    validate_box(a)
    validate_box(b)
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def union_box(a: Box, b: Box) -> Box:
    """Smallest box containing both inputs (componentwise min/max)."""
    validate_box(a)
    validate_box(b)
    return Box(
        min(a.x_min, b.x_min),
        min(a.y_min, b.y_min),
        max(a.x_max, b.x_max),
        max(a.y_max, b.y_max),
    )


def clip(box: Box) -> Box:
    """Clamp all coordinates to [0, 1].

    Inverted extents collapse to zero width/height at the lower coordinate,
    so the result is always ordered; callers detect fully-ejected boxes via
    :attr:`Box.is_degenerate`.
    """
    vals = box.as_tuple()
    if not all(math.isfinite(v) for v in vals):
        raise InvalidBoxError(f"non-finite box coordinates: {vals}")
    x0 = min(max(box.x_min, 0.0), 1.0)
    y0 = min(max(box.y_min, 0.0), 1.0)
    x1 = min(max(box.x_max, 0.0), 1.0)
    y1 = min(max(box.y_max, 0.0), 1.0)
    return Box(x0, y0, max(x0, x1), max(y0, y1))
