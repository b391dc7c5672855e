"""
"MVOL" raw volume files: b"MVOL", three u32 extents (D, H, W), then
D * H * W little-endian float32 values in C order.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import bittensor as bt
import numpy as np
import torch

from constants import VOLUME_MAGIC

HEADER = struct.Struct("<4s3I")


class VolumeFormatError(ValueError):
    pass


def write_volume(path: str | Path, volume: np.ndarray | torch.Tensor) -> None:
    if isinstance(volume, torch.Tensor):
        volume = volume.detach().cpu().numpy()
    volume = np.asarray(volume)
    if volume.ndim != 3:
        raise ValueError(f"Expected a 3D volume, got shape {volume.shape}")
    path = Path(path)
    try:
        with open(path, "wb") as f:
            f.write(HEADER.pack(VOLUME_MAGIC, *volume.shape))
            f.write(volume.astype("<f4").tobytes(order="C"))
    except OSError as e:
        bt.logging.error(f"Failed to write volume {path}: {e}")
        raise RuntimeError(f"Failed to write volume {path}: {e}") from e


def read_volume(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise RuntimeError(f"Failed to read volume {path}: {e}") from e
    if len(data) < HEADER.size:
        raise VolumeFormatError(f"{path}: truncated header")
    magic, *shape = HEADER.unpack_from(data)
    if magic != VOLUME_MAGIC:
        raise VolumeFormatError(f"{path}: bad magic bytes {magic!r}")
    expected = HEADER.size + 4 * math.prod(shape)
    if len(data) != expected:
        raise VolumeFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=HEADER.size).reshape(shape).copy()
