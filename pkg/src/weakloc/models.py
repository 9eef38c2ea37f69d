"""Small convolutional models and the momentum (EMA) shadow update.

The classifier and localizer are separate networks of the same shape: a
three-stage convolutional backbone with total spatial downsample 8,
followed by global average pooling and a linear head.  GroupNorm keeps
inference deterministic and free of running statistics, so the EMA shadow
is a pure function of parameter history.

Parameter mutation (optimizer steps, :func:`ema_update`) must stay
single-writer; inference on a frozen snapshot may run concurrently.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .geometry import Box, clip

__all__ = [
    "DOWNSAMPLE",
    "DEFAULT_WIDTHS",
    "ConvBackbone",
    "Classifier",
    "Localizer",
    "to_input",
    "classify",
    "extract_features",
    "localize",
    "feature_extractor",
    "ema_update",
]

DOWNSAMPLE = 8
DEFAULT_WIDTHS = (16, 32, 64)


class ConvBackbone(nn.Module):
    """3x (conv3x3 -> GroupNorm -> ReLU -> maxpool2) feature extractor."""

    def __init__(self, widths=DEFAULT_WIDTHS, norm_groups: int = 4):
        super().__init__()
        layers = []
        in_ch = 3
        for w in widths:
            layers += [
                nn.Conv2d(in_ch, w, kernel_size=3, padding=1),
                nn.GroupNorm(norm_groups, w),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(2),
            ]
            in_ch = w
        self.stages = nn.Sequential(*layers)
        self.out_channels = widths[-1]

    def forward(self, x):
        return self.stages(x)


class Classifier(nn.Module):
    """Backbone + global average pooling + linear head over classes."""

    def __init__(self, num_classes: int, widths=DEFAULT_WIDTHS):
        super().__init__()
        if num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {num_classes}")
        self.num_classes = num_classes
        self.backbone = ConvBackbone(widths)
        self.head = nn.Linear(self.backbone.out_channels, num_classes)

    def features(self, x):
        return self.backbone(x)

    def forward(self, x):
        f = self.backbone(x)
        return self.head(f.mean(dim=(2, 3)))


class Localizer(nn.Module):
    """Backbone + global average pooling + linear head emitting a raw 4-vector.

    Outputs are unconstrained reals; clipping to [0, 1] happens at inference
    only (see :func:`localize`), so MSE gradients survive outside the frame.
    The head bias starts at a centered prior box.
    """

    def __init__(self, widths=DEFAULT_WIDTHS):
        super().__init__()
        self.backbone = ConvBackbone(widths)
        self.head = nn.Linear(self.backbone.out_channels, 4)
        with torch.no_grad():
            self.head.bias.copy_(torch.tensor([0.25, 0.25, 0.75, 0.75]))

    def features(self, x):
        return self.backbone(x)

    def forward(self, x):
        f = self.backbone(x)
        return self.head(f.mean(dim=(2, 3)))


def to_input(images) -> torch.Tensor:
    """8-bit RGB array(s) (H, W, 3) or (N, H, W, 3) -> float NCHW in [0, 1]."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(f"expected (N, H, W, 3) or (H, W, 3) image input, got {np.shape(images)}")
    t = torch.from_numpy(np.ascontiguousarray(arr)).to(torch.float32)
    return t.permute(0, 3, 1, 2) / 255.0


def classify(model: Classifier, images) -> np.ndarray:
    """Class probability distribution(s) for raw 8-bit image(s).

    Deterministic in inference mode: the softmax output sums to 1 per row.
    """
    single = np.asarray(images).ndim == 3
    model.eval()
    with torch.no_grad():
        probs = torch.softmax(model(to_input(images)), dim=1).numpy()
    return probs[0] if single else probs


def extract_features(model, images) -> np.ndarray:
    """Feature stack(s) (C, h, w) from a model exposing ``.features``."""
    single = np.asarray(images).ndim == 3
    model.eval()
    with torch.no_grad():
        feats = model.features(to_input(images)).numpy()
    return feats[0] if single else feats


def localize(model: Localizer, images, clip_boxes: bool = True):
    """Predicted box(es) for raw 8-bit image(s); clipped to [0, 1] by default."""
    single = np.asarray(images).ndim == 3
    model.eval()
    with torch.no_grad():
        raw = model(to_input(images)).numpy().astype(np.float64)
    boxes = [Box.from_seq(row) for row in raw]
    if clip_boxes:
        boxes = [clip(b) for b in boxes]
    return boxes[0] if single else boxes


def feature_extractor(model):
    """Wrap a model as the callable extractor interface used by pseudogen."""

    def extract(image):
        return extract_features(model, image)

    return extract


def ema_update(shadow: nn.Module, live: nn.Module, beta: float) -> nn.Module:
    """Momentum update: every shadow entry becomes beta*shadow + (1-beta)*live.

    The two modules must share architecture (identical state-dict names and
    shapes).  Non-floating entries are copied from live.  Returns ``shadow``,
    which is mutated in place.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    shadow_sd = shadow.state_dict()
    live_sd = live.state_dict()
    if list(shadow_sd) != list(live_sd):
        raise ValueError("shadow and live parameter names differ")
    with torch.no_grad():
        for name, s in shadow_sd.items():
            l = live_sd[name]
            if s.shape != l.shape:
                raise ValueError(f"shape mismatch for {name}: {tuple(s.shape)} vs {tuple(l.shape)}")
            if torch.is_floating_point(s):
                s.mul_(beta).add_(l.to(s.dtype), alpha=1.0 - beta)
            else:
                s.copy_(l)
    return shadow
