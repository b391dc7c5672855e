from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import bittensor as bt
import torch

from autodiff import tensor_ops as ops
from autodiff.precision import default_precision
from masking.sparse_ops import mask_like
from model.checkpoint import load_checkpoint
from models.run_config import RunConfig
from training.data_source import SyntheticVolumeSource
from training.pretrain_session import build_model, step_pyramid
from training.volume_io import write_volume
from utils.system import prepare_out_dir

INPUT_FILENAME = "input.mvol"
MASKED_INPUT_FILENAME = "masked_input.mvol"
RECONSTRUCTION_FILENAME = "reconstruction.mvol"


@dataclass
class ReconstructResult:
    input_path: Path
    masked_input_path: Path
    reconstruction_path: Path
    loss: float


def cmd_reconstruct(checkpoint: str | Path, config: RunConfig) -> ReconstructResult:
    """
    Reconstruct one synthetic volume (data seed data.seed, mask seed
    mask.seed) with the checkpointed model and dump the input, the masked
    input and the reconstruction as MVOL files in out_dir.
    """
    out_dir = prepare_out_dir(config.out_dir)
    model = build_model(config)
    load_checkpoint(checkpoint, model)
    model.eval()

    with default_precision(config.precision) as dtype, torch.no_grad():
        volume = SyntheticVolumeSource(config).batch(0, 1, dtype)
        pyramid = step_pyramid(config, 0)
        batch = model.reconstruct(volume, pyramid)
        masked = ops.mul(volume, mask_like(pyramid.finest, volume))

    result = ReconstructResult(
        input_path=out_dir / INPUT_FILENAME,
        masked_input_path=out_dir / MASKED_INPUT_FILENAME,
        reconstruction_path=out_dir / RECONSTRUCTION_FILENAME,
        loss=batch.loss.item(),
    )
    write_volume(result.input_path, volume[0, 0])
    write_volume(result.masked_input_path, masked[0, 0])
    write_volume(result.reconstruction_path, batch.prediction[0, 0])
    bt.logging.success(
        f"Reconstruction at mask ratio {config.mask.ratio}: masked MSE {result.loss:.6f}, "
        f"volumes written to {out_dir}"
    )
    return result
