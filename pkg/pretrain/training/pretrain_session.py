from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import bittensor as bt
from tqdm import tqdm

from autodiff import tensor_ops as ops
from autodiff.optim import CheckedAdamW, cosine_schedule
from autodiff.precision import default_precision
from constants import (
    CHECKPOINT_FILENAME,
    CONFIG_FILENAME,
    FINAL_LOSS_WINDOW,
    METRICS_FILENAME,
)
from masking.mask_pyramid import MaskPyramid, pyramid_for_volume
from model.checkpoint import save_checkpoint
from model.hybrid import HybridMaskedAutoencoder
from models.run_config import RunConfig
from training.data_source import SyntheticVolumeSource, VolumeSource
from training.metrics_writer import MetricsWriter
from utils.logging import log_run_summary
from utils.system import prepare_out_dir, seed_everything


@dataclass
class PretrainResult:
    out_dir: Path
    model: HybridMaskedAutoencoder
    losses: list[float] = field(default_factory=list)

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / CHECKPOINT_FILENAME

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / METRICS_FILENAME

    @property
    def final_loss(self) -> float:
        """
        Mean loss over the last FINAL_LOSS_WINDOW steps.
        """
        if not self.losses:
            return math.nan
        window = self.losses[-FINAL_LOSS_WINDOW:]
        return sum(window) / len(window)


def build_model(config: RunConfig) -> HybridMaskedAutoencoder:
    """
    Seeded model at the configured precision.
    """
    seed_everything(config.seed)
    with default_precision(config.precision):
        return HybridMaskedAutoencoder.from_config(config)


def step_pyramid(config: RunConfig, step: int) -> MaskPyramid:
    return pyramid_for_volume(
        config.volume_shape,
        config.n_stages,
        config.mask.ratio,
        config.mask.seed + step,
        config.mask.strategy,
    )


def write_run_config(config: RunConfig, out_dir: Path) -> Path:
    path = out_dir / CONFIG_FILENAME
    try:
        path.write_text("\n".join(config.to_flat()) + "\n", encoding="utf-8")
    except OSError as e:
        bt.logging.error(f"Failed to write run config {path}: {e}")
        raise RuntimeError(f"Failed to write run config {path}: {e}") from e
    return path


def cmd_pretrain(
    config: RunConfig,
    source: VolumeSource | None = None,
    show_progress: bool = True,
) -> PretrainResult:
    """
    Masked reconstruction pre-training on fresh synthetic batches.

    Step t (1-based) draws its volumes with data seed data.seed + t and its
    mask pyramid with mask.seed + t; AdamW follows a cosine schedule from lr
    to zero over `steps`. Writes config.txt, metrics.tsv and checkpoint.mmim
    into out_dir.
    """
    out_dir = prepare_out_dir(config.out_dir)
    write_run_config(config, out_dir)
    model = build_model(config)
    result = PretrainResult(out_dir=out_dir, model=model)
    source = source or SyntheticVolumeSource(config)

    with default_precision(config.precision) as dtype:
        optimizer = CheckedAdamW(
            model.parameters(),
            lr=config.lr,
            betas=config.betas,
            weight_decay=config.weight_decay,
        )
        scheduler = cosine_schedule(optimizer, config.steps)
        bt.logging.info(
            f"Pre-training for {config.steps} steps, batch {config.batch_size}, "
            f"{config.mask.strategy} mask ratio {config.mask.ratio}, "
            f"{config.scan.order} scan, "
            f"{config.decoder.mask_fill} fill"
        )
        with MetricsWriter(result.metrics_path) as metrics:
            for step in tqdm(
                range(1, config.steps + 1), desc="Pre-training", disable=not show_progress
            ):
                volumes = source.batch(step, config.batch_size, dtype)
                pyramid = step_pyramid(config, step)
                lr = optimizer.param_groups[0]["lr"]

                optimizer.zero_grad(set_to_none=True)
                loss = model.reconstruct(volumes, pyramid).loss
                ops.backward(loss)
                optimizer.step()
                scheduler.step()

                value = loss.item()
                if not math.isfinite(value):
                    raise RuntimeError(f"Loss diverged at step {step}: {value}")
                metrics.write(step, lr, value)
                result.losses.append(value)
                bt.logging.debug(f"step {step} lr {lr:.3e} loss {value:.6f}")

    save_checkpoint(result.checkpoint_path, model)
    summary = {"steps": config.steps, "out_dir": str(out_dir)}
    if result.losses:
        summary.update(first_loss=result.losses[0], final_loss=result.final_loss)
    if show_progress:
        log_run_summary("Pre-training summary", summary)
    bt.logging.success(f"Pre-training finished, checkpoint at {result.checkpoint_path}")
    return result
