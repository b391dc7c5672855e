from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import torch

from models.enums import MaskStrategy


class MaskConsistencyError(ValueError):
    """
    Raised when masks of adjacent stages do not describe the same positions.
    """


def downsample_mask(mask: np.ndarray) -> np.ndarray:
    """
    Halve a boolean mask along every axis. All 8 voxels of each 2x2x2 block
    must agree.
    """
    if mask.ndim != 3 or any(s % 2 for s in mask.shape):
        raise MaskConsistencyError(
            f"Cannot downsample a mask of shape {mask.shape}: extents must be even"
        )
    d, h, w = (s // 2 for s in mask.shape)
    blocks = mask.reshape(d, 2, h, 2, w, 2)
    coarse = blocks.any(axis=(1, 3, 5))
    if not np.array_equal(coarse, blocks.all(axis=(1, 3, 5))):
        raise MaskConsistencyError("Mask blocks are not uniform at 2x2x2 granularity")
    return coarse


def upsample_mask(mask: np.ndarray) -> np.ndarray:
    for axis in range(3):
        mask = np.repeat(mask, 2, axis=axis)
    return mask


@dataclass
class MaskPyramid:
    """
    Aligned boolean masks, finest stage first; True marks a visible voxel.

    stages[k] has twice the extent of stages[k + 1] along every axis.
    When `aligned`, every stage is also the exact upsample of the next one.
    """

    stages: list[np.ndarray]
    ratio: float
    seed: int
    aligned: bool = True

    def __post_init__(self):
        if not self.stages:
            raise MaskConsistencyError("A mask pyramid needs at least one stage")
        self.stages = [np.asarray(stage, dtype=bool) for stage in self.stages]

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def finest(self) -> np.ndarray:
        return self.stages[0]

    @property
    def coarse(self) -> np.ndarray:
        return self.stages[-1]

    @property
    def volume_shape(self) -> tuple[int, int, int]:
        return tuple(self.finest.shape)

    def masked_count(self, stage: int = -1) -> int:
        return int((~self.stages[stage]).sum())

    def validate(self) -> None:
        for k in range(self.n_stages - 1):
            fine, coarse = self.stages[k], self.stages[k + 1]
            expected = tuple(2 * s for s in coarse.shape)
            if fine.shape != expected:
                raise MaskConsistencyError(
                    f"Stage {k} has shape {fine.shape}, expected {expected}"
                )
            if self.aligned and not np.array_equal(downsample_mask(fine), coarse):
                raise MaskConsistencyError(
                    f"Stage {k} does not downsample onto stage {k + 1}"
                )

    def as_tensor(
        self, stage: int, dtype: torch.dtype, device: torch.device | str = "cpu"
    ) -> torch.Tensor:
        return torch.as_tensor(self.stages[stage], device=device).to(dtype)


def masked_voxel_count(ratio: float, size: int) -> int:
    """
    floor(ratio * size), computed on the decimal value of `ratio` so that
    e.g. 0.29 of 100 voxels masks 29 and not 28.
    """
    return math.floor(Fraction(str(ratio)) * size)


def _draw_mask(shape: tuple[int, ...], ratio: float, rng: np.random.Generator) -> np.ndarray:
    size = math.prod(shape)
    mask = np.ones(size, dtype=bool)
    mask[rng.choice(size, size=masked_voxel_count(ratio, size), replace=False)] = False
    return mask.reshape(shape)


def _check_arguments(coarse_shape: tuple[int, ...], n_stages: int, ratio: float) -> tuple[int, ...]:
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"Mask ratio must lie in [0, 1), got {ratio}")
    if n_stages < 1:
        raise ValueError(f"n_stages must be at least 1, got {n_stages}")
    coarse_shape = tuple(int(s) for s in coarse_shape)
    if len(coarse_shape) != 3 or any(s < 1 for s in coarse_shape):
        raise ValueError(f"Invalid coarse shape {coarse_shape}")
    return coarse_shape


def build_mask_pyramid(
    coarse_shape: tuple[int, int, int], n_stages: int, ratio: float, seed: int
) -> MaskPyramid:
    """
    Draw the coarsest mask with exactly floor(ratio * size) masked voxels,
    uniformly without replacement, and upsample it to every finer stage.

    Args:
        coarse_shape (tuple[int, int, int]): Extents of the coarsest stage.
        n_stages (int): Number of stages, including the coarsest.
        ratio (float): Masked fraction, in [0, 1).
        seed (int): Seed of the sampling generator.
    """
    coarse_shape = _check_arguments(coarse_shape, n_stages, ratio)
    stages = [_draw_mask(coarse_shape, ratio, np.random.default_rng(seed))]
    for _ in range(n_stages - 1):
        stages.insert(0, upsample_mask(stages[0]))
    return MaskPyramid(stages=stages, ratio=ratio, seed=seed)


def build_independent_pyramid(
    coarse_shape: tuple[int, int, int], n_stages: int, ratio: float, seed: int
) -> MaskPyramid:
    """
    Draw every stage on its own with floor(ratio * size) masked voxels, coarsest
    first from one generator. Adjacent stages generally disagree, so the
    pyramid is not aligned.
    """
    coarse_shape = _check_arguments(coarse_shape, n_stages, ratio)
    rng = np.random.default_rng(seed)
    stages = []
    for k in range(n_stages):
        shape = tuple(s * 2 ** (n_stages - 1 - k) for s in coarse_shape)
        stages.append(_draw_mask(shape, ratio, rng))
    stages.reverse()
    return MaskPyramid(stages=stages, ratio=ratio, seed=seed, aligned=False)


def pyramid_for_volume(
    volume_shape: tuple[int, int, int],
    n_stages: int,
    ratio: float,
    seed: int,
    strategy: MaskStrategy | str = MaskStrategy.BOTTOM_UP,
) -> MaskPyramid:
    """
    Mask pyramid whose finest stage matches `volume_shape`.
    """
    factor = 2 ** (n_stages - 1)
    if any(s % factor for s in volume_shape):
        raise ValueError(
            f"Volume shape {tuple(volume_shape)} is not divisible by {factor}"
        )
    coarse_shape = tuple(s // factor for s in volume_shape)
    if MaskStrategy(strategy) == MaskStrategy.INDEPENDENT:
        return build_independent_pyramid(coarse_shape, n_stages, ratio, seed)
    return build_mask_pyramid(coarse_shape, n_stages, ratio, seed)
