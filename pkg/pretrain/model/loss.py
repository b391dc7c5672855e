from __future__ import annotations

import numpy as np
import torch

from autodiff import tensor_ops as ops
from autodiff.errors import ShapeError
from masking.mask_pyramid import MaskPyramid


def masked_mse(x: torch.Tensor, x_hat: torch.Tensor, pyramid: MaskPyramid) -> torch.Tensor:
    """
    Mean squared error over the voxels masked in the finest stage, averaged
    over the batch. Visible voxels are never read.
    """
    if x.shape != x_hat.shape:
        raise ShapeError("masked_mse", x.shape, x_hat.shape)
    if tuple(x.shape[2:]) != pyramid.volume_shape:
        raise ShapeError("masked_mse", x.shape[2:], pyramid.volume_shape, "mask extents")
    masked = np.flatnonzero(~pyramid.finest.reshape(-1))
    if masked.size == 0:
        raise ValueError("masked_mse is undefined for a fully visible pyramid")

    batch, channels = x.shape[:2]
    shape = (batch, channels, -1)
    target = ops.gather(x.reshape(shape), masked, dim=2)
    prediction = ops.gather(x_hat.reshape(shape), masked, dim=2)
    diff = ops.sub(prediction, target)
    return ops.mean(ops.mul(diff, diff))
