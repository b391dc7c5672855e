from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import torch

from autodiff import tensor_ops as ops
from autodiff.errors import ShapeError
from masking.scan_orders import GridShape, inverse_permutation, scan_order
from masking.sparse_ops import SparseFeature
from models.enums import ScanOrder


@dataclass
class TokenSequence:
    """
    Visible tokens of a grid in scan order.

    Attributes:
        tokens (torch.Tensor): (B, K, C) channel vectors.
        positions (np.ndarray): (K, 3) grid coordinates of each token.
        ranks (np.ndarray): (K,) index of each token in the full scan order.
        order (ScanOrder): Scan order the sequence follows.
        grid_shape (GridShape): Extents of the grid the tokens came from.
        shuffle_seed (int | None): Seed of the permutation, shuffle order only.
    """

    tokens: torch.Tensor
    positions: np.ndarray
    ranks: np.ndarray
    order: ScanOrder
    grid_shape: GridShape
    shuffle_seed: int | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64).reshape(-1, 3)
        self.ranks = np.asarray(self.ranks, dtype=np.int64)
        self.order = ScanOrder(self.order)
        self.grid_shape = tuple(int(s) for s in self.grid_shape)
        if self.tokens.dim() != 3 or self.tokens.shape[1] != self.positions.shape[0]:
            raise ShapeError(
                "token_sequence", self.tokens.shape, self.positions.shape, "token count"
            )
        if self.ranks.shape != (self.positions.shape[0],):
            raise ShapeError("token_sequence", self.ranks.shape, self.positions.shape, "ranks")
        if len(self.positions) and (
            (self.positions < 0).any() or (self.positions >= np.array(self.grid_shape)).any()
        ):
            raise ValueError(f"Token positions fall outside the grid {self.grid_shape}")

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def total_length(self) -> int:
        return math.prod(self.grid_shape)

    @property
    def linear_positions(self) -> np.ndarray:
        return np.ravel_multi_index(tuple(self.positions.T), self.grid_shape).astype(np.int64)

    def full_order(self) -> np.ndarray:
        return scan_order(self.grid_shape, self.order, self.shuffle_seed)

    def with_tokens(self, tokens: torch.Tensor) -> TokenSequence:
        return replace(self, tokens=tokens)


def serialize(
    feature: SparseFeature, order: ScanOrder | str, seed: int | None = None
) -> TokenSequence:
    """
    Enumerate the grid in `order` and keep the visible voxels.
    """
    order = ScanOrder(order)
    if feature.visible_count == 0:
        raise ValueError("Cannot serialize a feature with no visible voxels")
    grid_shape = feature.mask.shape
    shuffle_seed = seed if order == ScanOrder.SHUFFLE else None
    full = scan_order(grid_shape, order, shuffle_seed)
    ranks = np.flatnonzero(feature.mask.reshape(-1)[full])
    linear = full[ranks]

    batch, channels = feature.grid.shape[:2]
    flat = ops.reshape(feature.grid, (batch, channels, math.prod(grid_shape)))
    tokens = ops.permute(ops.gather(flat, linear, dim=2), (0, 2, 1))
    positions = np.stack(np.unravel_index(linear, grid_shape), axis=1)
    return TokenSequence(
        tokens=tokens,
        positions=positions,
        ranks=ranks,
        order=order,
        grid_shape=grid_shape,
        shuffle_seed=shuffle_seed,
    )


def deserialize(seq: TokenSequence, fill: torch.Tensor | None = None) -> torch.Tensor:
    """
    Scatter tokens back onto the (B, C, D, H, W) grid; unoccupied voxels take
    `fill`, a (C,) vector, or zero.
    """
    batch, _, channels = seq.tokens.shape
    total = seq.total_length
    shape = (batch, total, channels)
    if fill is None:
        base = torch.zeros(shape, dtype=seq.tokens.dtype, device=seq.tokens.device)
    else:
        if tuple(fill.shape) != (channels,):
            raise ShapeError("deserialize", fill.shape, (channels,), "fill vector")
        base = ops.expand(fill.view(1, 1, channels), shape).contiguous()
    dense = ops.scatter(base, seq.linear_positions, seq.tokens, dim=1)
    return ops.reshape(ops.permute(dense, (0, 2, 1)), (batch, channels, *seq.grid_shape))


def sequence_to_grid(
    dense: torch.Tensor, order: np.ndarray, grid_shape: GridShape
) -> torch.Tensor:
    """
    Reorder a dense (B, L, C) sequence in scan order into a (B, C, D, H, W) grid.
    """
    batch, length, channels = dense.shape
    if length != order.shape[0]:
        raise ShapeError("sequence_to_grid", dense.shape, order.shape, "sequence length")
    grid_flat = ops.gather(dense, inverse_permutation(order), dim=1)
    return ops.reshape(ops.permute(grid_flat, (0, 2, 1)), (batch, channels, *grid_shape))
