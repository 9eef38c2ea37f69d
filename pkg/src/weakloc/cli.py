"""Command-line interface.

Subcommands mirror the pipeline stages: ``pseudogen`` dumps generator
boxes, ``train-init`` and ``refine`` run the two training stages,
``evaluate`` writes the metric report (text plus figure), and
``visualize`` renders images with predicted and ground-truth boxes.
"""

from __future__ import annotations

import logging
from pathlib import Path

import click
import numpy as np

from . import pipeline
from .config import TrainConfig
from .evaluation import evaluate as evaluate_records
from .pseudogen import write_pseudo_labels
from .reporting import render_sample, write_per_image, write_report


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Weakly supervised object localization: pseudo boxes, two-stage training."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(message)s",
    )


def _split(state, name: str):
    train, test = pipeline.load_dataset(state.config)
    if name == "train":
        return train
    if name == "test":
        return test
    raise click.BadParameter(f"unknown split {name!r}")


@main.command("pseudogen")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--ckpt",
    "ckpt_path",
    default=None,
    type=click.Path(exists=True),
    help="Checkpoint whose EMA classifier drives the generator (default: fresh seeded model).",
)
def pseudogen_cmd(config_path: str, out_path: str, ckpt_path: str | None) -> None:
    """Dump generator boxes for the training split to a text file."""
    if ckpt_path is not None:
        state = pipeline.load_checkpoint(ckpt_path)
    else:
        config = TrainConfig.from_file(config_path)
        state = pipeline.build_state(config)
    train, _ = pipeline.load_dataset(state.config)
    rows = pipeline.generate_pseudo_labels(state, train.training_view())
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_pseudo_labels(out_path, rows)
    click.echo(f"wrote {len(rows)} pseudo labels to {out_path}")


@main.command("train-init")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def train_init_cmd(config_path: str, out_path: str) -> None:
    """Run the initialization stage and write a checkpoint."""
    config = TrainConfig.from_file(config_path)
    train, _ = pipeline.load_dataset(config)
    state = pipeline.train_init(train.training_view(), config)
    pipeline.save_checkpoint(state, out_path)
    click.echo(f"stage-1 checkpoint written to {out_path}")


@main.command("refine")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--init", "init_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def refine_cmd(config_path: str, init_path: str, out_path: str) -> None:
    """Run the refinement stage from a stage-1 checkpoint."""
    config = TrainConfig.from_file(config_path)
    state = pipeline.load_checkpoint(init_path)
    train, _ = pipeline.load_dataset(config)
    state = pipeline.train_refine(train.training_view(), state, config)
    pipeline.save_checkpoint(state, out_path)
    click.echo(f"refined checkpoint written to {out_path}")


@main.command("evaluate")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_name", default="test", show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option(
    "--per-image",
    "per_image_path",
    default=None,
    type=click.Path(),
    help="Also write a per-image debug listing.",
)
def evaluate_cmd(
    ckpt_path: str, split_name: str, report_path: str, per_image_path: str | None
) -> None:
    """Score a split and write the metric report (text + figure)."""
    state = pipeline.load_checkpoint(ckpt_path)
    split = _split(state, split_name)
    records = pipeline.predict_records(state, split)
    report = evaluate_records(records)
    write_report(report, report_path, records)
    if per_image_path is not None:
        write_per_image(records, per_image_path)
    click.echo(f"report written to {report_path}")
    click.echo(
        f"gt_known={report.gt_known_acc:.4f} top1_loc={report.top1_loc_acc:.4f} "
        f"top5_loc={report.top5_loc_acc:.4f} (n={report.n_images})"
    )


@main.command("visualize")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--n", "n_images", default=8, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--split", "split_name", default="test", show_default=True)
def visualize_cmd(ckpt_path: str, n_images: int, out_dir: str, split_name: str) -> None:
    """Render images with predicted (blue) and ground-truth (red) boxes."""
    state = pipeline.load_checkpoint(ckpt_path)
    split = _split(state, split_name)
    picks = np.random.default_rng(state.config.seed).permutation(len(split))[:n_images]
    out = Path(out_dir)
    for i in picks:
        sample = split[int(i)]
        _, box = pipeline.predict(state, sample.image)
        render_sample(
            sample.image,
            box,
            sample.gt_boxes,
            out / f"{Path(sample.image_id).stem}.png",
            title=f"{sample.image_id} (class {sample.class_label})",
        )
    click.echo(f"wrote {len(picks)} renderings to {out_dir}")


if __name__ == "__main__":
    main()
