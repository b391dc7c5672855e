"""
Bijections from a 3D voxel grid onto a 1D visiting order.

Every function returns a permutation of the C-order linear indices of the
grid: entry r is the linear index of the r-th voxel visited. Axis 2 of a
(D, H, W) grid is the fastest ("x") axis.
"""

from __future__ import annotations

import math

import numpy as np

from models.enums import ScanOrder

GridShape = tuple[int, int, int]


def _check_shape(grid_shape: GridShape) -> GridShape:
    grid_shape = tuple(int(s) for s in grid_shape)
    if len(grid_shape) != 3 or any(s < 1 for s in grid_shape):
        raise ValueError(f"Expected three positive grid extents, got {grid_shape}")
    return grid_shape


def raster_order(grid_shape: GridShape) -> np.ndarray:
    depth, height, width = _check_shape(grid_shape)
    return np.arange(depth * height * width, dtype=np.int64)


def zigzag_order(grid_shape: GridShape) -> np.ndarray:
    """
    Boustrophedon scan: rows alternate direction along x, and every second
    plane walks its rows bottom-up, so consecutive voxels are always neighbors.
    """
    depth, height, width = _check_shape(grid_shape)
    i = np.arange(depth)[:, None, None]
    row = np.arange(height)[None, :, None]
    col = np.arange(width)[None, None, :]
    j = np.where(i % 2 == 0, row, height - 1 - row)
    # rows are counted in visiting order across planes
    visited_rows = i * height + row
    k = np.where(visited_rows % 2 == 0, col, width - 1 - col)
    linear = (i * height + j) * width + k
    return np.broadcast_to(linear, (depth, height, width)).reshape(-1).astype(np.int64)


def _hilbert_axes(bits: int) -> np.ndarray:
    """
    Coordinates of every point of the 3D Hilbert curve of side 2**bits,
    in curve order, shape (8**bits, 3).
    """
    count = 1 << (3 * bits)
    if bits == 0:
        return np.zeros((1, 3), dtype=np.int64)

    distance = np.arange(count, dtype=np.int64)
    axes = np.zeros((3, count), dtype=np.int64)
    # distance bits, most significant first, are dealt round-robin to the axes
    for k in range(3 * bits):
        bit = (distance >> (3 * bits - 1 - k)) & 1
        axes[k % 3] |= bit << (bits - 1 - k // 3)

    # Gray decode
    t = axes[2] >> 1
    for i in (2, 1):
        axes[i] ^= axes[i - 1]
    axes[0] ^= t

    # undo excess work
    side = 1 << bits
    q = 2
    while q != side:
        p = q - 1
        for i in (2, 1, 0):
            high = (axes[i] & q) != 0
            t = (axes[0] ^ axes[i]) & p
            first = np.where(high, axes[0] ^ p, axes[0] ^ t)
            if i:
                axes[i] = np.where(high, axes[i], axes[i] ^ t)
            axes[0] = first
        q <<= 1
    return axes.T


def hilbert_order(grid_shape: GridShape) -> np.ndarray:
    """
    3D Hilbert curve on the enclosing power-of-two cube, skipping the points
    that fall outside the grid.
    """
    depth, height, width = _check_shape(grid_shape)
    bits = math.ceil(math.log2(max(depth, height, width)))
    points = _hilbert_axes(bits)
    inside = (points[:, 0] < depth) & (points[:, 1] < height) & (points[:, 2] < width)
    points = points[inside]
    return (points[:, 0] * height + points[:, 1]) * width + points[:, 2]


def shuffle_order(grid_shape: GridShape, seed: int) -> np.ndarray:
    depth, height, width = _check_shape(grid_shape)
    rng = np.random.default_rng(seed)
    return rng.permutation(depth * height * width).astype(np.int64)


def scan_order(
    grid_shape: GridShape, order: ScanOrder | str, seed: int | None = None
) -> np.ndarray:
    order = ScanOrder(order)
    if order == ScanOrder.RASTER:
        return raster_order(grid_shape)
    if order == ScanOrder.ZIGZAG:
        return zigzag_order(grid_shape)
    if order == ScanOrder.HILBERT:
        return hilbert_order(grid_shape)
    if seed is None:
        raise ValueError("Shuffle scan order requires a seed")
    return shuffle_order(grid_shape, seed)


def inverse_permutation(order: np.ndarray) -> np.ndarray:
    """
    inverse[order[r]] == r
    """
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.shape[0], dtype=order.dtype)
    return inverse
