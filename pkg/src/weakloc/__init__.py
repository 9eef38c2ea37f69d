"""Weakly supervised object localization toolkit.

Pseudo bounding boxes are generated from classifier attention, a localizer
is trained against them, and the localizer is then refined by consistency
regularization restricted to high-confidence predictions.
"""

from .augmentation import (
    GeneralAugParams,
    StrongAugParams,
    apply_general,
    apply_strong,
    sample_strong_params,
)
from .config import ConfigError, TrainConfig, make_synth_spec
from .data import DatasetSplit, Sample, SynthSpec, TrainingView, generate_synthetic, load_directory
from .evaluation import EvalRecord, MetricsReport, evaluate, gt_known_correct, topk_correct
from .geometry import Box, InvalidBoxError, area, clip, iou, union_box
from .losses import LossValue, cls_loss, init_loss, refine_loss, reg_loss
from .models import Classifier, ConvBackbone, Localizer, classify, ema_update, localize
from .pipeline import (
    RunState,
    build_state,
    load_checkpoint,
    predict,
    predict_records,
    save_checkpoint,
    train_init,
    train_refine,
)
from .pseudogen import PseudoLabel, generate_pseudo_box
from .refinement import ConfidenceScore, ConsistencyPair, build_consistency_pair, confidence_of

__version__ = "0.1.0"

__all__ = [
    "Box",
    "InvalidBoxError",
    "iou",
    "union_box",
    "clip",
    "area",
    "PseudoLabel",
    "generate_pseudo_box",
    "Classifier",
    "ConvBackbone",
    "Localizer",
    "classify",
    "localize",
    "ema_update",
    "LossValue",
    "cls_loss",
    "reg_loss",
    "init_loss",
    "refine_loss",
    "StrongAugParams",
    "GeneralAugParams",
    "sample_strong_params",
    "apply_strong",
    "apply_general",
    "ConfidenceScore",
    "ConsistencyPair",
    "confidence_of",
    "build_consistency_pair",
    "EvalRecord",
    "MetricsReport",
    "evaluate",
    "gt_known_correct",
    "topk_correct",
    "Sample",
    "SynthSpec",
    "DatasetSplit",
    "TrainingView",
    "generate_synthetic",
    "load_directory",
    "ConfigError",
    "TrainConfig",
    "make_synth_spec",
    "RunState",
    "build_state",
    "train_init",
    "train_refine",
    "predict",
    "predict_records",
    "save_checkpoint",
    "load_checkpoint",
    "__version__",
]
