"""Datasets: a deterministic synthetic-shapes generator and an index-file
loader for image directories.

Training code consumes :class:`TrainingView`, which physically withholds
ground-truth boxes (the view stores only id, pixels, and class label, so
no box is reachable from the training path).  Evaluation reads the full
:class:`DatasetSplit`.  Loaders are read-only after construction; shuffle
order is owned by the training pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .geometry import Box

__all__ = [
    "Sample",
    "SynthSpec",
    "DatasetSplit",
    "TrainingView",
    "IndexFileError",
    "generate_synthetic",
    "load_directory",
]

KINDS = ("rectangle", "ellipse")
# every channel value above the noise ceiling, so object pixels are exact
COLORS = ((230, 50, 40), (60, 210, 70), (50, 90, 230), (235, 220, 60))


@dataclass(frozen=True)
class Sample:
    """One dataset record; ``gt_boxes`` is None on box-less (training) loads."""

    image_id: str
    image: np.ndarray
    class_label: int
    gt_boxes: tuple[Box, ...] | None


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic-shapes dataset description.

    Each image holds exactly one solid object (shape kind x color defines
    the class) fully inside the frame, over seeded uniform noise.  The
    recorded box is the exact extent of the rasterized object mask.
    """

    seed: int = 0
    n_train: int = 200
    n_test: int = 100
    num_classes: int = 8
    image_size: int = 64
    noise_level: float = 0.4
    min_object_frac: float = 0.1
    max_object_frac: float = 0.4


class TrainingView:
    """Box-less dataset interface: items are (image_id, image, class_label)."""

    def __init__(self, items: Sequence[tuple[str, np.ndarray, int]]):
        self._items = list(items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> tuple[str, np.ndarray, int]:
        return self._items[i]

    def __iter__(self) -> Iterator[tuple[str, np.ndarray, int]]:
        return iter(self._items)


class DatasetSplit:
    """In-memory list of samples with an eval view (self) and a training view."""

    def __init__(self, samples: Sequence[Sample]):
        self._samples = list(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, i: int) -> Sample:
        return self._samples[i]

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._samples)

    def training_view(self) -> TrainingView:
        """Copy of the split that carries no ground-truth boxes at all."""
        return TrainingView([(s.image_id, s.image, s.class_label) for s in self._samples])


class IndexFileError(ValueError):
    """Malformed dataset index file; the message names the offending line."""


def _mask_extent_box(mask: np.ndarray) -> Box:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    h, w = mask.shape
    return Box(
        float(cols[0]) / w,
        float(rows[0]) / h,
        float(cols[-1] + 1) / w,
        float(rows[-1] + 1) / h,
    )


def _draw_sample(rng: np.random.Generator, spec: SynthSpec, image_id: str, class_index: int) -> Sample:
    s = spec.image_size
    noise_max = int(round(255 * spec.noise_level))
    img = rng.integers(0, noise_max + 1, size=(s, s, 3)).astype(np.uint8)

    kind = KINDS[class_index // len(COLORS)]
    color = COLORS[class_index % len(COLORS)]
    min_px = max(2, int(round(spec.min_object_frac * s)))
    max_px = int(round(spec.max_object_frac * s))
    w = int(rng.integers(min_px, max_px + 1))
    h = int(rng.integers(min_px, max_px + 1))
    x0 = int(rng.integers(0, s - w + 1))
    y0 = int(rng.integers(0, s - h + 1))

    if kind == "rectangle":
        mask = np.zeros((s, s), dtype=bool)
        mask[y0 : y0 + h, x0 : x0 + w] = True
    else:
        cy, cx = y0 + h / 2.0, x0 + w / 2.0
        yy = np.arange(s) + 0.5
        xx = np.arange(s) + 0.5
        dy = (yy[:, None] - cy) / (h / 2.0)
        dx = (xx[None, :] - cx) / (w / 2.0)
        mask = dy**2 + dx**2 <= 1.0

    img[mask] = np.asarray(color, dtype=np.uint8)
    return Sample(image_id, img, class_index, (_mask_extent_box(mask),))


def generate_synthetic(spec: SynthSpec) -> tuple[DatasetSplit, DatasetSplit]:
    """Deterministic (train, test) splits; classes cycle round-robin."""
    expected_classes = len(KINDS) * len(COLORS)
    if spec.num_classes != expected_classes:
        raise ValueError(
            f"num_classes must equal kinds x colors = {expected_classes}, got {spec.num_classes}"
        )
    min_px = int(round(spec.min_object_frac * spec.image_size))
    max_px = int(round(spec.max_object_frac * spec.image_size))
    if not 0 < spec.min_object_frac <= spec.max_object_frac < 1.0 or min_px < 2:
        raise ValueError(
            f"object size range ({spec.min_object_frac}, {spec.max_object_frac}) infeasible "
            f"for image size {spec.image_size}"
        )
    if spec.n_train < 1 or spec.n_test < 1:
        raise ValueError("both splits need at least one sample")
    if not 0.0 <= spec.noise_level < 0.55:
        raise ValueError(
            f"noise_level must lie in [0, 0.55) so noise never matches a palette color, "
            f"got {spec.noise_level}"
        )
    rng = np.random.default_rng(spec.seed)
    train = [
        _draw_sample(rng, spec, f"train_{i:05d}", i % spec.num_classes)
        for i in range(spec.n_train)
    ]
    test = [
        _draw_sample(rng, spec, f"test_{i:05d}", i % spec.num_classes)
        for i in range(spec.n_test)
    ]
    return DatasetSplit(train), DatasetSplit(test)


def load_directory(root, split: str, num_classes: int) -> DatasetSplit:
    """Load samples listed in ``<root>/<split>.txt``.

    Line format: ``relpath,class_index[,x0,y0,x1,y1]...`` with normalized
    corner coordinates.  The training split drops box columns even when
    present; every other split requires at least one box per line.
    """
    from PIL import Image

    root = Path(root)
    index = root / f"{split}.txt"
    if not index.is_file():
        raise IndexFileError(f"missing index file: {index}")
    is_train = split == "train"
    samples = []
    with open(index, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise IndexFileError(f"{index}:{lineno}: expected at least path and class")
            relpath = parts[0]
            try:
                label = int(parts[1])
            except ValueError:
                raise IndexFileError(f"{index}:{lineno}: bad class index {parts[1]!r}") from None
            if not 0 <= label < num_classes:
                raise IndexFileError(
                    f"{index}:{lineno}: class index {label} outside [0, {num_classes})"
                )
            coords = parts[2:]
            if len(coords) % 4 != 0:
                raise IndexFileError(
                    f"{index}:{lineno}: box columns must come in groups of four"
                )
            boxes = []
            for j in range(0, len(coords), 4):
                try:
                    vals = [float(v) for v in coords[j : j + 4]]
                except ValueError:
                    raise IndexFileError(
                        f"{index}:{lineno}: bad box coordinate in {coords[j : j + 4]}"
                    ) from None
                if any(not 0.0 <= v <= 1.0 for v in vals):
                    raise IndexFileError(
                        f"{index}:{lineno}: coordinate outside [0, 1] in {vals}"
                    )
                box = Box.from_seq(vals)
                if box.x_min > box.x_max or box.y_min > box.y_max:
                    raise IndexFileError(f"{index}:{lineno}: box has negative extent {vals}")
                boxes.append(box)
            if is_train:
                gt: tuple[Box, ...] | None = None
            else:
                if not boxes:
                    raise IndexFileError(
                        f"{index}:{lineno}: evaluation split requires at least one box"
                    )
                gt = tuple(boxes)
            image_path = root / relpath
            if not image_path.is_file():
                raise IndexFileError(f"{index}:{lineno}: missing image file {image_path}")
            image = np.asarray(Image.open(image_path).convert("RGB"))
            samples.append(Sample(relpath, image, label, gt))
    return DatasetSplit(samples)
