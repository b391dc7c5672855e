from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
import torch

from models.run_config import RunConfig, SyntheticVolumeSpec


def gen_volume(spec: SyntheticVolumeSpec) -> np.ndarray:
    """
    Ellipsoid blobs with intensity * exp(-r^2) falloff, combined by maximum
    over a constant background and clipped to [0, 1]. Deterministic in the seed.
    """
    rng = np.random.default_rng(spec.seed)
    shape = np.array(spec.shape, dtype=np.float64)
    volume = np.full(spec.shape, spec.background, dtype=np.float64)
    coords = np.stack(
        np.meshgrid(*(np.arange(s, dtype=np.float64) for s in spec.shape), indexing="ij")
    )

    low, high = spec.n_blobs
    for _ in range(int(rng.integers(low, high + 1))):
        center = rng.uniform(0.2, 0.8, size=3) * shape
        radii = rng.uniform(0.1, 0.3, size=3) * shape
        intensity = rng.uniform(*spec.intensity)
        r2 = (((coords - center[:, None, None, None]) / radii[:, None, None, None]) ** 2).sum(
            axis=0
        )
        volume = np.maximum(volume, intensity * np.exp(-r2))
    return np.clip(volume, 0.0, 1.0)


class VolumeProcessor(ABC):
    @abstractmethod
    def process(self, volumes: torch.Tensor, seed: int) -> torch.Tensor:
        pass


class DefaultVolumeProcessor(VolumeProcessor):
    def process(self, volumes: torch.Tensor, seed: int) -> torch.Tensor:
        return volumes


class AugmentingVolumeProcessor(VolumeProcessor):
    """
    Seeded random flips along each spatial axis and per-volume intensity
    jitter, clipped back to [0, 1].
    """

    def __init__(self, jitter_scale: float = 0.1):
        self.jitter_scale = jitter_scale

    def process(self, volumes: torch.Tensor, seed: int) -> torch.Tensor:
        generator = torch.Generator().manual_seed(seed)
        for axis in (2, 3, 4):
            if torch.rand(1, generator=generator) > 0.5:
                volumes = torch.flip(volumes, dims=[axis])
        batch = volumes.shape[0]
        jitter = 1.0 + (torch.rand(batch, 1, 1, 1, 1, generator=generator) * 2 - 1) * (
            self.jitter_scale
        )
        return torch.clamp(volumes * jitter.to(volumes.dtype), 0.0, 1.0)


class VolumeSource(ABC):
    def __init__(self, processor: VolumeProcessor | None = None):
        self.processor = processor or DefaultVolumeProcessor()

    @abstractmethod
    def batch(self, step: int, batch_size: int, dtype: torch.dtype) -> torch.Tensor:
        """
        (batch_size, 1, D, H, W) volumes for training step `step`.
        """


class SyntheticVolumeSource(VolumeSource):
    """
    Fresh synthetic volumes every step. Volume b of step t uses seed
    (data.seed + t) * batch_size + b, so batches never repeat across steps.
    """

    def __init__(self, config: RunConfig, processor: VolumeProcessor | None = None):
        if processor is None and config.data.augment:
            processor = AugmentingVolumeProcessor()
        super().__init__(processor)
        self.config = config

    def batch(self, step: int, batch_size: int, dtype: torch.dtype) -> torch.Tensor:
        base = (self.config.data.seed + step) * batch_size
        volumes = np.stack(
            [gen_volume(self.config.volume_spec(base + b)) for b in range(batch_size)]
        )
        tensor = torch.from_numpy(volumes).to(dtype).unsqueeze(1)
        return self.processor.process(tensor, self.config.data.seed + step)
