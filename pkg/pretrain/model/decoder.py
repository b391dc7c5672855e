"""
Hierarchical hybrid decoder: fill the masked coarse tokens, project them to a
dense coarse grid, then climb back through the convolution stages with
upsampling blocks and skip fusion of the filled sparse features.
"""

from __future__ import annotations

import torch
from torch import nn

from autodiff import tensor_ops as ops
from constants import DEFAULT_DECODER_WIDTH, DEFAULT_TOKI_INIT, TOKEN_INIT_STD
from masking.mask_pyramid import MaskConsistencyError, MaskPyramid
from masking.serialization import sequence_to_grid
from masking.sparse_ops import SparseFeature, mask_like
from model.encoder import EncoderOutput
from models.enums import MaskFill, TokiVariant
from toki.interpolation import TokenInterpolation
from toki.learnable_fill import LearnableTokenFill


class ConvBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv3d(in_channels, out_channels, 3, padding=1)
        self.conv2 = nn.Conv3d(out_channels, out_channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = ops.silu(ops.conv3d(x, self.conv1.weight, self.conv1.bias, padding=1))
        return ops.silu(ops.conv3d(x, self.conv2.weight, self.conv2.bias, padding=1))


class UpBlock(ConvBlock):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return ops.upsample2x(super().forward(x))


class HybridDecoder(nn.Module):
    def __init__(
        self,
        stage_widths: list[int],
        model_dim: int,
        width: int = DEFAULT_DECODER_WIDTH,
        mask_fill: MaskFill | str = MaskFill.TOKI,
        toki_init: float = DEFAULT_TOKI_INIT,
        toki_variant: TokiVariant | str = TokiVariant.EQ8,
        skip: bool = True,
    ):
        super().__init__()
        self.stage_widths = list(stage_widths)
        self.mask_fill = MaskFill(mask_fill)
        self.skip = skip
        self.fill = (
            TokenInterpolation(model_dim, toki_init, toki_variant)
            if self.mask_fill == MaskFill.TOKI
            else LearnableTokenFill(model_dim)
        )
        self.phi = nn.Linear(model_dim, width)
        self.fill_tokens = nn.ParameterList(
            nn.Parameter(torch.randn(c) * TOKEN_INIT_STD) for c in self.stage_widths
        )
        self.projs = nn.ModuleList(nn.Conv3d(c, width, 1) for c in self.stage_widths)
        self.up_blocks = nn.ModuleList(UpBlock(width, width) for _ in self.stage_widths)
        self.skip_blocks = nn.ModuleList(ConvBlock(2 * width, width) for _ in self.stage_widths)
        self.head = nn.Conv3d(width, 1, 1)

    def _check_pyramid(self, encoded: EncoderOutput, pyramid: MaskPyramid) -> None:
        sequence = encoded.tokens
        if pyramid.n_stages != len(self.stage_widths) + 1:
            raise MaskConsistencyError(
                f"Decoder expects {len(self.stage_widths) + 1} stages, pyramid has {pyramid.n_stages}"
            )
        if sequence.grid_shape != pyramid.coarse.shape or len(sequence) != int(pyramid.coarse.sum()):
            raise MaskConsistencyError("Token sequence does not match the coarse mask")
        if not (pyramid.coarse.reshape(-1)[sequence.linear_positions]).all():
            raise MaskConsistencyError("Token sequence holds masked positions")
        for k, skip in enumerate(encoded.skips):
            if skip.mask.shape != pyramid.stages[k].shape or not (skip.mask == pyramid.stages[k]).all():
                raise MaskConsistencyError(f"Skip feature {k} was encoded under another mask")

    def fill_sparse(self, feature: SparseFeature, k: int) -> torch.Tensor:
        """
        Write fill token t_k at every masked voxel of S_k.
        """
        visible = mask_like(feature.mask, feature.grid)
        token = ops.expand(self.fill_tokens[k].view(1, -1, 1, 1, 1), feature.grid.shape)
        return ops.add(feature.grid, ops.mul(ops.sub(torch.ones_like(visible), visible), token))

    def forward(self, encoded: EncoderOutput, pyramid: MaskPyramid) -> torch.Tensor:
        self._check_pyramid(encoded, pyramid)
        sequence = encoded.tokens
        dense = self.fill.fill_sequence(sequence)
        dense = self.phi(dense)
        d = sequence_to_grid(dense, sequence.full_order(), sequence.grid_shape)

        for k in reversed(range(len(self.stage_widths))):
            skip = self.projs[k](self.fill_sparse(encoded.skips[k], k))
            if not self.skip:
                skip = ops.scale(skip, 0.0)
            up = self.up_blocks[k](d)
            d = self.skip_blocks[k](ops.concat([skip, up], dim=1))
        return self.head(d)
