"""
Hierarchical hybrid encoder: sparse convolution stages on the fine grids,
then Mamba blocks over the visible tokens of the coarsest grid.

With a single stage there are no convolution stages: the patch embedding
turns visible voxels straight into tokens (vanilla Mamba).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from autodiff import tensor_ops as ops
from constants import (
    DEFAULT_CNN_WIDTH,
    DEFAULT_DEPTH,
    DEFAULT_EXPAND,
    DEFAULT_MODEL_DIM,
    DEFAULT_N_STAGES,
    DEFAULT_STATE_DIM,
    POSITION_EMBEDDING_STD,
)
from masking.mask_pyramid import MaskConsistencyError, MaskPyramid
from masking.sparse_ops import (
    SparseConv3d,
    SparseFeature,
    SparseLayerNorm,
    layer_norm_channels,
    sparse_max_pool,
    sparse_silu,
)
from masking.serialization import TokenSequence, serialize
from models.enums import ScanOrder
from ssm.mamba_block import MambaBlock


def stage_widths(cnn_width: int, n_stages: int) -> list[int]:
    """
    Channel widths of the n - 1 convolution stages, doubling per stage.
    """
    return [cnn_width * 2**k for k in range(n_stages - 1)]


@dataclass
class EncoderOutput:
    tokens: TokenSequence
    skips: list[SparseFeature]


class ConvStage(nn.Module):
    """
    Two sparse 3x3x3 convolutions, each followed by per-voxel layer norm and SiLU.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = SparseConv3d(in_channels, out_channels)
        self.norm1 = SparseLayerNorm(out_channels)
        self.conv2 = SparseConv3d(out_channels, out_channels)
        self.norm2 = SparseLayerNorm(out_channels)

    def forward(self, feature: SparseFeature) -> SparseFeature:
        feature = sparse_silu(self.norm1(self.conv1(feature)))
        return sparse_silu(self.norm2(self.conv2(feature)))

    def dense_forward(self, x: torch.Tensor) -> torch.Tensor:
        for conv, norm in ((self.conv1, self.norm1), (self.conv2, self.norm2)):
            x = ops.conv3d(x, conv.conv.weight, conv.conv.bias, padding=conv.padding)
            x = ops.silu(layer_norm_channels(x, norm.weight, norm.bias, norm.eps))
        return x


class HybridEncoder(nn.Module):
    def __init__(
        self,
        volume_shape: tuple[int, int, int],
        n_stages: int = DEFAULT_N_STAGES,
        cnn_width: int = DEFAULT_CNN_WIDTH,
        model_dim: int = DEFAULT_MODEL_DIM,
        depth: int = DEFAULT_DEPTH,
        state_dim: int = DEFAULT_STATE_DIM,
        expand: int = DEFAULT_EXPAND,
        causal_conv: bool = True,
        in_channels: int = 1,
    ):
        super().__init__()
        if n_stages < 1:
            raise ValueError(f"The encoder needs at least 1 stage, got {n_stages}")
        check_divisible(volume_shape, n_stages)
        self.volume_shape = tuple(volume_shape)
        self.n_stages = n_stages
        self.model_dim = model_dim
        self.widths = stage_widths(cnn_width, n_stages)
        self.coarse_shape = tuple(s // 2 ** (n_stages - 1) for s in volume_shape)

        stages, channels = [], in_channels
        for width in self.widths:
            stages.append(ConvStage(channels, width))
            channels = width
        self.stages = nn.ModuleList(stages)
        self.patch_embed = SparseConv3d(channels, model_dim, kernel_size=1)
        self.position_embedding = nn.Parameter(
            torch.randn(math.prod(self.coarse_shape), model_dim) * POSITION_EMBEDDING_STD
        )
        self.blocks = nn.ModuleList(
            MambaBlock(model_dim, state_dim, expand, causal_conv) for _ in range(depth)
        )

    def _check_inputs(self, volume: torch.Tensor, pyramid: MaskPyramid) -> None:
        if tuple(volume.shape[2:]) != self.volume_shape:
            raise ValueError(
                f"Volume extents {tuple(volume.shape[2:])} differ from the encoder's {self.volume_shape}"
            )
        if pyramid.n_stages != self.n_stages or pyramid.volume_shape != self.volume_shape:
            raise MaskConsistencyError(
                f"Pyramid with {pyramid.n_stages} stages over {pyramid.volume_shape} "
                f"does not fit {self.n_stages} stages over {self.volume_shape}"
            )
        pyramid.validate()

    def _mamba(self, tokens: torch.Tensor, linear_positions: np.ndarray) -> torch.Tensor:
        position = ops.gather(self.position_embedding, linear_positions, dim=0)
        tokens = ops.add(tokens, ops.expand(position.unsqueeze(0), tokens.shape))
        for block in self.blocks:
            tokens = block(tokens)
        return tokens

    def encode(
        self,
        volume: torch.Tensor,
        pyramid: MaskPyramid,
        order: ScanOrder | str = ScanOrder.RASTER,
        seed: int | None = None,
    ) -> EncoderOutput:
        """
        Args:
            volume (torch.Tensor): (B, 1, D, H, W) input volumes.
            pyramid (MaskPyramid): Masks shared by the whole batch.
            order (ScanOrder): Serialization order of the coarse tokens.
            seed (int | None): Permutation seed for the shuffle order.

        Returns:
            EncoderOutput: Mamba-encoded visible tokens and the sparse features
            S_1..S_{n-1} of the convolution stages.
        """
        self._check_inputs(volume, pyramid)
        feature = SparseFeature.from_dense(volume, pyramid.stages[0])
        skips = []
        for k, stage in enumerate(self.stages):
            feature = stage(feature)
            skips.append(feature)
            feature = sparse_max_pool(feature, pyramid.stages[k + 1], pyramid.aligned)
        feature = self.patch_embed(feature)

        sequence = serialize(feature, order, seed)
        tokens = self._mamba(sequence.tokens, sequence.linear_positions)
        return EncoderOutput(tokens=sequence.with_tokens(tokens), skips=skips)

    def dense_forward(self, volume: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """
        Mask-free forward pass in raster order, for comparison with `encode`
        under a fully visible pyramid.
        """
        x, skips = volume, []
        for stage in self.stages:
            x = stage.dense_forward(x)
            skips.append(x)
            x = ops.max_pool2x(x)
        embed = self.patch_embed
        x = ops.conv3d(x, embed.conv.weight, embed.conv.bias)
        length = math.prod(self.coarse_shape)
        tokens = ops.permute(ops.reshape(x, (x.shape[0], self.model_dim, length)), (0, 2, 1))
        linear = np.arange(length, dtype=np.int64)
        return self._mamba(tokens, linear), skips


def check_divisible(volume_shape: tuple[int, ...], n_stages: int) -> None:
    factor = 2**n_stages
    if len(volume_shape) != 3 or any(s % factor for s in volume_shape):
        raise ValueError(
            f"Volume extents {tuple(volume_shape)} must be divisible by 2**n_stages = {factor}"
        )
