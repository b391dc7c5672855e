"""
Operators on sparse features: masked voxels are zero before every operator
and are zeroed again afterwards, so masked content never reaches a visible
output through a receptive field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from autodiff import tensor_ops as ops
from autodiff.errors import ShapeError
from constants import LAYER_NORM_EPS
from masking.mask_pyramid import MaskConsistencyError, downsample_mask


def mask_like(mask: np.ndarray, grid: torch.Tensor) -> torch.Tensor:
    """
    Broadcast a (D, H, W) boolean mask to the (B, C, D, H, W) shape of `grid`.
    """
    weights = torch.as_tensor(mask, device=grid.device).to(grid.dtype)
    return ops.expand(weights.view(1, 1, *mask.shape), grid.shape)


@dataclass
class SparseFeature:
    grid: torch.Tensor
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.grid.dim() != 5:
            raise ShapeError(
                "sparse_feature", self.grid.shape, detail="expected (B, C, D, H, W)"
            )
        if tuple(self.grid.shape[2:]) != self.mask.shape:
            raise ShapeError("sparse_feature", self.grid.shape[2:], self.mask.shape)

    @classmethod
    def from_dense(cls, grid: torch.Tensor, mask: np.ndarray) -> SparseFeature:
        return cls(grid=ops.mul(grid, mask_like(np.asarray(mask, dtype=bool), grid)), mask=mask)

    @property
    def channels(self) -> int:
        return self.grid.shape[1]

    @property
    def visible_count(self) -> int:
        return int(self.mask.sum())


def sparse_op(
    feature: SparseFeature,
    operator: Callable[[torch.Tensor], torch.Tensor],
    out_mask: np.ndarray | None = None,
    aligned: bool = True,
) -> SparseFeature:
    """
    Operator(S * M_in) * M_out.

    Args:
        feature (SparseFeature): Input features with their mask.
        operator (Callable): Dense operator on (B, C, D, H, W) tensors.
        out_mask (np.ndarray | None): The input mask, or its 2x downsample for
            pooling operators. Defaults to the input mask.
        aligned (bool): Require a half-extent `out_mask` to be the exact
            downsample of the input mask. Off for independently drawn stages.
    """
    out_mask = feature.mask if out_mask is None else np.asarray(out_mask, dtype=bool)
    if out_mask.shape != feature.mask.shape:
        if out_mask.shape != tuple(s // 2 for s in feature.mask.shape):
            raise ShapeError("sparse_op", feature.mask.shape, out_mask.shape, "mask extents")
        if aligned and not np.array_equal(downsample_mask(feature.mask), out_mask):
            raise MaskConsistencyError("Output mask is not the downsampled input mask")
    elif not np.array_equal(out_mask, feature.mask):
        raise MaskConsistencyError("Output mask differs from the input mask")

    x = ops.mul(feature.grid, mask_like(feature.mask, feature.grid))
    y = operator(x)
    if tuple(y.shape[2:]) != out_mask.shape:
        raise ShapeError("sparse_op", y.shape[2:], out_mask.shape, "operator output extents")
    return SparseFeature(grid=ops.mul(y, mask_like(out_mask, y)), mask=out_mask)


def layer_norm_channels(
    x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor, eps: float = LAYER_NORM_EPS
) -> torch.Tensor:
    """
    Layer normalization over the channel axis of each voxel independently.
    """
    channels_last = ops.permute(x, (0, 2, 3, 4, 1))
    normed = F.layer_norm(channels_last, (x.shape[1],), weight, bias, eps)
    return ops.permute(normed, (0, 4, 1, 2, 3))


class SparseConv3d(nn.Module):
    """
    Same-extent 3D convolution on sparse features.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {kernel_size}")
        self.padding = kernel_size // 2
        self.conv = nn.Conv3d(in_channels, out_channels, kernel_size, padding=self.padding)

    def forward(self, feature: SparseFeature) -> SparseFeature:
        return sparse_op(
            feature,
            lambda x: ops.conv3d(x, self.conv.weight, self.conv.bias, padding=self.padding),
        )


class SparseLayerNorm(nn.Module):
    def __init__(self, channels: int, eps: float = LAYER_NORM_EPS):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, feature: SparseFeature) -> SparseFeature:
        return sparse_op(
            feature, lambda x: layer_norm_channels(x, self.weight, self.bias, self.eps)
        )


def sparse_silu(feature: SparseFeature) -> SparseFeature:
    return sparse_op(feature, ops.silu)


def sparse_max_pool(
    feature: SparseFeature, out_mask: np.ndarray, aligned: bool = True
) -> SparseFeature:
    return sparse_op(feature, ops.max_pool2x, out_mask, aligned)
