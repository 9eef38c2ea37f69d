"""Two-stage training orchestration, checkpointing, and inference.

Stage 1 (initialization) trains the classifier on raw and masked views
with the dual cross entropy while the localizer regresses onto pseudo
boxes.  The pseudo boxes are regenerated every step from the EMA shadow of
the classifier (never the live network), and the shadow trails the live
weights by the momentum update after each optimizer step.  One SGD
optimizer holds two parameter groups: the classifier rate decays
exponentially per epoch, the localizer rate stays constant.

Stage 2 (refinement) freezes the classifier and trains the localizer to
match its own transformed predictions, keeping only pairs whose raw-image
crop the classifier scores above the confidence threshold.  Batches with
nothing retained skip the optimizer step entirely, so a fully filtered
epoch is a no-op.

The training loops accept only the box-less
:class:`~weakloc.data.TrainingView` interface, so no ground-truth box is
reachable from either stage.  All randomness (data order, crop/flip draws,
strong-transform draws) flows through the single numpy generator stored in
:class:`RunState`; per step the draw order is: general params per sample
in batch order, then (stage 2 only) strong params per sample.  Checkpoints
are written at epoch boundaries and resume the run bit-identically.
Parameter mutation is single-writer throughout.
"""

from __future__ import annotations

import functools
import logging
import tempfile
from copy import deepcopy
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .augmentation import (
    apply_general,
    center_general_params,
    invert_general,
    sample_general_params,
    sample_strong_params,
)
from .config import ConfigError, TrainConfig, make_synth_spec
from .data import DatasetSplit, TrainingView, generate_synthetic, load_directory
from .evaluation import EvalRecord
from .geometry import FULL_IMAGE, Box, clip, union_box
from .losses import cls_loss, init_loss, refine_loss, reg_loss
from .models import Classifier, Localizer, ema_update, extract_features, to_input
from .pseudogen import PseudoLabel, attention_region, mask_out
from .refinement import build_consistency_batch, format_pair_record

__all__ = [
    "RunState",
    "build_state",
    "train_init",
    "train_refine",
    "predict",
    "predict_records",
    "predict_with_confidence",
    "generate_pseudo_labels",
    "load_dataset",
    "save_checkpoint",
    "load_checkpoint",
    "ARCHITECTURE_ID",
    "CHECKPOINT_FORMAT",
]

logger = logging.getLogger(__name__)

ARCHITECTURE_ID = "convbackbone-16-32-64"
CHECKPOINT_FORMAT = "weakloc-checkpoint-v1"
SGD_MOMENTUM = 0.9
WEIGHT_DECAY = 1e-5


@dataclass
class RunState:
    """Everything needed to continue or query a run."""

    config: TrainConfig
    classifier: Classifier
    ema_classifier: Classifier
    localizer: Localizer
    rng: np.random.Generator
    stage: str = "init"
    epoch: int = 0
    step: int = 0
    optimizer_state: dict | None = None


def build_state(config: TrainConfig) -> RunState:
    """Fresh models seeded from the config; the EMA shadow starts as an exact
    copy of the live classifier."""
    config.validate()
    torch.manual_seed(config.seed)
    classifier = Classifier(config.num_classes)
    localizer = Localizer()
    ema = deepcopy(classifier)
    ema.requires_grad_(False)
    ema.eval()
    rng = np.random.default_rng(config.seed)
    return RunState(config, classifier, ema, localizer, rng)


def load_dataset(config: TrainConfig) -> tuple[DatasetSplit, DatasetSplit]:
    """(train, test) splits: synthetic shapes unless ``data_root`` is set."""
    if config.data_root:
        train = load_directory(config.data_root, "train", config.num_classes)
        test = load_directory(config.data_root, "test", config.num_classes)
        return train, test
    return generate_synthetic(make_synth_spec(config))


def _strong_sampler(config: TrainConfig):
    return functools.partial(
        sample_strong_params,
        scale_range=(config.scale_min, config.scale_max),
        translate_limit=config.translate_limit,
        translate_prob=config.translate_prob,
        flip_prob=config.flip_prob,
    )


def _general_batch(dataset: TrainingView, indices, rng, config: TrainConfig, train: bool):
    """Augmented uint8 batch (N, S, S, 3) plus ids and labels."""
    ids, images, labels = [], [], []
    for i in indices:
        image_id, image, label = dataset[int(i)]
        if train:
            params = sample_general_params(
                rng, config.pre_crop_size, config.input_size, config.flip_prob
            )
        else:
            params = center_general_params(config.pre_crop_size, config.input_size)
        aug, _ = apply_general(image, None, params, config.pre_crop_size, config.input_size)
        ids.append(image_id)
        images.append(aug)
        labels.append(label)
    return ids, np.stack(images), np.asarray(labels, dtype=np.int64)


def _batched_pseudo(
    ema_model: Classifier, images: np.ndarray, delta: float
) -> tuple[list[PseudoLabel], np.ndarray]:
    """Batched two-pass generator, step-for-step equal to
    :func:`~weakloc.pseudogen.generate_pseudo_box` per image.

    Also returns the masked batch (raw image with the first-pass region
    zeroed; all zeros under the full-image fallback), which stage 1 feeds to
    the classifier as the masked view.
    """
    feats_raw = extract_features(ema_model, images)
    raw_regions = [attention_region(f, delta) for f in feats_raw]
    masked = np.stack(
        [
            mask_out(img, region) if region is not None else np.zeros_like(img)
            for img, region in zip(images, raw_regions)
        ]
    )
    feats_masked = extract_features(ema_model, masked)
    # assemble labels with the same fallback rules as the per-image operation
    out: list[PseudoLabel] = []
    for region, f_m in zip(raw_regions, feats_masked):
        if region is None:
            out.append(PseudoLabel(FULL_IMAGE, FULL_IMAGE, FULL_IMAGE, True))
            continue
        masked_region = attention_region(f_m, delta)
        if masked_region is None:
            out.append(PseudoLabel(clip(region), region, region, True))
            continue
        out.append(
            PseudoLabel(clip(union_box(region, masked_region)), region, masked_region, False)
        )
    return out, masked


def _abort_non_finite(state: RunState, loss_value: float, diagnostic_dir) -> None:
    path = Path(diagnostic_dir or tempfile.gettempdir()) / (
        f"weakloc_diagnostic_{state.stage}_epoch{state.epoch}_step{state.step}.pt"
    )
    save_checkpoint(state, path)
    raise RuntimeError(
        f"non-finite loss {loss_value} at stage={state.stage} epoch={state.epoch} "
        f"step={state.step}; diagnostic checkpoint written to {path}"
    )


def _batch_indices(perm: np.ndarray, batch_size: int):
    for start in range(0, len(perm), batch_size):
        yield perm[start : start + batch_size]


def train_init(
    dataset: TrainingView,
    config: TrainConfig,
    state: RunState | None = None,
    until_epoch: int | None = None,
    diagnostic_dir=None,
) -> RunState:
    """Stage 1: pseudo-supervised training of classifier and localizer.

    Per step: general-augment the batch, generate pseudo boxes online from
    the EMA shadow, mask the first-pass regions out of the raw views, take
    one SGD step on the combined loss, then move the shadow.  Resumes from
    ``state`` when given (at epoch granularity); trains up to
    ``until_epoch`` or the configured epoch count.
    """
    config.validate()
    if len(dataset) == 0:
        raise ConfigError("training dataset is empty")
    if state is None:
        state = build_state(config)
    if state.stage != "init":
        raise ValueError(f"expected an init-stage state, got {state.stage!r}")

    optimizer = torch.optim.SGD(
        [
            {"params": state.classifier.parameters(), "lr": config.lr_cls},
            {"params": state.localizer.parameters(), "lr": config.lr_loc},
        ],
        momentum=SGD_MOMENTUM,
        weight_decay=WEIGHT_DECAY,
    )
    if state.optimizer_state is not None:
        optimizer.load_state_dict(state.optimizer_state)

    target_epoch = config.epochs_init if until_epoch is None else min(until_epoch, config.epochs_init)
    n = len(dataset)
    while state.epoch < target_epoch:
        lr_cls_now = config.lr_cls * config.lr_decay_cls**state.epoch
        optimizer.param_groups[0]["lr"] = lr_cls_now
        perm = state.rng.permutation(n)
        for indices in _batch_indices(perm, config.batch_size):
            _, images, labels = _general_batch(dataset, indices, state.rng, config, train=True)
            with torch.no_grad():
                pseudo, masked_images = _batched_pseudo(
                    state.ema_classifier, images, config.delta
                )
            x_raw = to_input(images)
            x_masked = to_input(masked_images)
            state.classifier.train()
            state.localizer.train()
            probs_raw = torch.softmax(state.classifier(x_raw), dim=1)
            probs_masked = torch.softmax(state.classifier(x_masked), dim=1)
            cls = cls_loss(probs_raw, probs_masked, labels)
            pred = state.localizer(x_raw)
            targets = torch.tensor(
                [pl.merged.as_tuple() for pl in pseudo], dtype=torch.float32
            )
            reg = reg_loss(pred, targets)
            total = init_loss(cls, reg, config.alpha)
            if not torch.isfinite(total.value):
                _abort_non_finite(state, total.item(), diagnostic_dir)
            optimizer.zero_grad()
            total.value.backward()
            optimizer.step()
            ema_update(state.ema_classifier, state.classifier, config.beta)
            state.step += 1
            logger.info(
                "stage=init epoch=%d step=%d cls_loss=%.6f reg_loss=%.6f refine_loss=- "
                "retained=- lr_cls=%.6g lr_loc=%.6g",
                state.epoch,
                state.step,
                cls.item(),
                reg.item(),
                lr_cls_now,
                config.lr_loc,
            )
        state.epoch += 1
        state.optimizer_state = optimizer.state_dict()
    return state


def train_refine(
    dataset: TrainingView,
    state: RunState,
    config: TrainConfig,
    until_epoch: int | None = None,
    diagnostic_dir=None,
) -> RunState:
    """Stage 2: consistency refinement of the localizer alone.

    The stage-1 classifier is frozen; per step a consistency pair is built
    for every sample and the indicator-masked MSE drives the localizer.
    An epoch that retains nothing is logged as a no-op, not an error.
    """
    config.validate()
    if len(dataset) == 0:
        raise ConfigError("training dataset is empty")
    if state.stage == "init":
        state.stage = "refine"
        state.epoch = 0
        state.step = 0
        state.optimizer_state = None
    elif state.stage != "refine":
        raise ValueError(f"unknown stage {state.stage!r}")

    state.classifier.requires_grad_(False)
    state.classifier.eval()
    optimizer = torch.optim.SGD(
        state.localizer.parameters(),
        lr=config.lr_loc,
        momentum=SGD_MOMENTUM,
        weight_decay=WEIGHT_DECAY,
    )
    if state.optimizer_state is not None:
        optimizer.load_state_dict(state.optimizer_state)

    sampler = _strong_sampler(config)
    target_epoch = (
        config.epochs_refine if until_epoch is None else min(until_epoch, config.epochs_refine)
    )
    n = len(dataset)
    while state.epoch < target_epoch:
        perm = state.rng.permutation(n)
        epoch_retained = 0
        for indices in _batch_indices(perm, config.batch_size):
            ids, images, _ = _general_batch(dataset, indices, state.rng, config, train=True)
            pairs = build_consistency_batch(
                state.localizer,
                state.classifier,
                list(images),
                state.rng,
                config.input_size,
                param_sampler=sampler,
            )
            confidences = np.array(
                [0.0 if p.degenerate else p.confidence.value for p in pairs]
            )
            targets = torch.tensor(
                [p.target_box.as_tuple() for p in pairs], dtype=torch.float32
            )
            strong = np.stack([p.strong_image for p in pairs])
            state.localizer.train()
            pred_strong = state.localizer(to_input(strong))
            loss = refine_loss(pred_strong, targets, confidences, config.tau)
            if not torch.isfinite(loss.value):
                _abort_non_finite(state, loss.item(), diagnostic_dir)
            if loss.retained_count > 0:
                optimizer.zero_grad()
                loss.value.backward()
                optimizer.step()
            epoch_retained += loss.retained_count
            state.step += 1
            logger.info(
                "stage=refine epoch=%d step=%d cls_loss=- reg_loss=- refine_loss=%.6f "
                "retained=%d lr_cls=- lr_loc=%.6g",
                state.epoch,
                state.step,
                loss.item(),
                loss.retained_count,
                config.lr_loc,
            )
            if logger.isEnabledFor(logging.DEBUG):
                for image_id, pair in zip(ids, pairs):
                    retained = (not pair.degenerate) and pair.confidence.value > config.tau
                    logger.debug(
                        "%s", format_pair_record(image_id, pair.confidence.source_box, pair, retained)
                    )
        if epoch_retained == 0:
            logger.warning(
                "stage=refine epoch=%d retained no samples (tau=%g): no-op epoch",
                state.epoch,
                config.tau,
            )
        state.epoch += 1
        state.optimizer_state = optimizer.state_dict()
    return state


def _eval_transform_batch(images, config: TrainConfig):
    params = center_general_params(config.pre_crop_size, config.input_size)
    batch = np.stack(
        [
            apply_general(img, None, params, config.pre_crop_size, config.input_size)[0]
            for img in images
        ]
    )
    return batch, params


def predict(state: RunState, images):
    """(probability distribution, clipped box) for raw image(s).

    Images go through the deterministic evaluation transform (resize to the
    pre-crop resolution, center crop); predicted boxes are mapped back to
    the original image frame, so they always land in [0, 1]^4.
    """
    arr_ndim = np.asarray(images[0] if isinstance(images, (list, tuple)) else images).ndim
    single = not isinstance(images, (list, tuple)) and arr_ndim == 3
    image_list = [images] if single else list(images)
    batch, params = _eval_transform_batch(image_list, state.config)
    state.classifier.eval()
    state.localizer.eval()
    with torch.no_grad():
        probs = torch.softmax(state.classifier(to_input(batch)), dim=1).numpy()
        raw = state.localizer(to_input(batch)).numpy().astype(np.float64)
    boxes = [
        invert_general(
            clip(Box.from_seq(row)), params, state.config.pre_crop_size, state.config.input_size
        )
        for row in raw
    ]
    if single:
        return probs[0], boxes[0]
    return probs, boxes


def predict_records(state: RunState, split: DatasetSplit, batch_size: int = 64) -> list[EvalRecord]:
    """Score a full evaluation split into records ready for the metrics."""
    records = []
    samples = list(split)
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        probs, boxes = predict(state, [s.image for s in chunk])
        for sample, dist, box in zip(chunk, probs, boxes):
            if sample.gt_boxes is None:
                raise ValueError(f"sample {sample.image_id} carries no ground-truth boxes")
            records.append(
                EvalRecord(sample.image_id, box, dist, tuple(sample.gt_boxes), sample.class_label)
            )
    return records


def predict_with_confidence(
    state: RunState, split: DatasetSplit, batch_size: int = 64
) -> tuple[list[EvalRecord], np.ndarray]:
    """Records plus the confidence score of each predicted box.

    Confidence is computed exactly as during refinement: the classifier
    scores the crop of the evaluation-transformed image at the predicted
    box (in crop coordinates, before mapping back to the original frame).
    """
    from .refinement import confidence_of

    records = []
    confidences = []
    samples = list(split)
    params = center_general_params(state.config.pre_crop_size, state.config.input_size)
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        batch, _ = _eval_transform_batch([s.image for s in chunk], state.config)
        state.classifier.eval()
        state.localizer.eval()
        with torch.no_grad():
            probs = torch.softmax(state.classifier(to_input(batch)), dim=1).numpy()
            raw = state.localizer(to_input(batch)).numpy().astype(np.float64)
        for sample, dist, row, image in zip(chunk, probs, raw, batch):
            crop_box = clip(Box.from_seq(row))
            conf = confidence_of(state.classifier, image, crop_box, state.config.input_size)
            box = invert_general(
                crop_box, params, state.config.pre_crop_size, state.config.input_size
            )
            if sample.gt_boxes is None:
                raise ValueError(f"sample {sample.image_id} carries no ground-truth boxes")
            records.append(
                EvalRecord(sample.image_id, box, dist, tuple(sample.gt_boxes), sample.class_label)
            )
            confidences.append(conf.value)
    return records, np.asarray(confidences)


def generate_pseudo_labels(
    state: RunState, dataset: TrainingView, batch_size: int = 64
) -> list[tuple[str, Box, bool]]:
    """Pseudo boxes for a training view, in original-image coordinates.

    Uses the EMA shadow and the deterministic evaluation transform, so the
    dump is reproducible for a given checkpoint.
    """
    config = state.config
    params = center_general_params(config.pre_crop_size, config.input_size)
    rows: list[tuple[str, Box, bool]] = []
    items = list(dataset)
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        batch, _ = _eval_transform_batch([img for _, img, _ in chunk], config)
        with torch.no_grad():
            pseudo, _ = _batched_pseudo(state.ema_classifier, batch, config.delta)
        for (image_id, _, _), pl in zip(chunk, pseudo):
            box = invert_general(pl.merged, params, config.pre_crop_size, config.input_size)
            rows.append((image_id, box, pl.fallback_used))
    return rows


def save_checkpoint(state: RunState, path) -> None:
    """Serialize named parameter arrays plus a metadata block."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "meta": {
            "architecture": ARCHITECTURE_ID,
            "num_classes": state.config.num_classes,
            "input_size": state.config.input_size,
            "stage": state.stage,
            "epoch": state.epoch,
            "step": state.step,
            "seed": state.config.seed,
        },
        "config": asdict(state.config),
        "classifier": state.classifier.state_dict(),
        "ema_classifier": state.ema_classifier.state_dict(),
        "localizer": state.localizer.state_dict(),
        "optimizer": state.optimizer_state,
        "numpy_rng": state.rng.bit_generator.state,
        "torch_rng": torch.get_rng_state(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path) -> RunState:
    """Rebuild a :class:`RunState`; restores the numpy and torch RNG streams."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a weakloc checkpoint: {path}")
    config = TrainConfig(**payload["config"]).validate()
    classifier = Classifier(config.num_classes)
    classifier.load_state_dict(payload["classifier"])
    ema = Classifier(config.num_classes)
    ema.load_state_dict(payload["ema_classifier"])
    ema.requires_grad_(False)
    ema.eval()
    localizer = Localizer()
    localizer.load_state_dict(payload["localizer"])
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["numpy_rng"]
    torch.set_rng_state(payload["torch_rng"])
    meta = payload["meta"]
    return RunState(
        config=config,
        classifier=classifier,
        ema_classifier=ema,
        localizer=localizer,
        rng=rng,
        stage=meta["stage"],
        epoch=meta["epoch"],
        step=meta["step"],
        optimizer_state=payload["optimizer"],
    )
