"""
"MMIM" parameter container.

    magic   4 bytes  b"MMIM"
    version u32
    count   u32
    count x {
        name_len u32, name UTF-8,
        dtype    u8   (1 = float32, 2 = float64),
        ndim     u32, dims u32 * ndim,
        values   little-endian, C order
    }
"""

from __future__ import annotations

import struct
from pathlib import Path

import bittensor as bt
import numpy as np
import torch
from torch import nn

from constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC

DTYPE_CODES = {torch.float32: 1, torch.float64: 2}
NUMPY_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class CheckpointError(ValueError):
    def __init__(self, path: str | Path, message: str):
        self.path = str(path)
        super().__init__(f"{path}: {message}")


def _encode(state: dict[str, torch.Tensor]) -> bytes:
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_FORMAT_VERSION, len(state))]
    for name, tensor in state.items():
        if tensor.dtype not in DTYPE_CODES:
            raise ValueError(f"Cannot store parameter {name} of dtype {tensor.dtype}")
        code = DTYPE_CODES[tensor.dtype]
        encoded = name.encode("utf-8")
        values = tensor.detach().cpu().contiguous().numpy().astype(NUMPY_DTYPES[code])
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BI", code, tensor.dim()))
        chunks.append(struct.pack(f"<{tensor.dim()}I", *tensor.shape))
        chunks.append(values.tobytes())
    return b"".join(chunks)


def save_checkpoint(path: str | Path, model: nn.Module) -> None:
    path = Path(path)
    state = {name: param for name, param in model.named_parameters()}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(_encode(state))
    except OSError as e:
        bt.logging.error(f"Failed to write checkpoint {path}: {e}")
        raise RuntimeError(f"Failed to write checkpoint {path}: {e}") from e
    bt.logging.debug(f"Wrote {len(state)} parameters to {path}")


def read_checkpoint(path: str | Path) -> dict[str, torch.Tensor]:
    """
    Parse a checkpoint into an ordered name -> tensor mapping.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise RuntimeError(f"Failed to read checkpoint {path}: {e}") from e

    offset = 0

    def take(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(data):
            raise CheckpointError(path, "unexpected end of file")
        chunk = data[offset : offset + size]
        offset += size
        return chunk

    if take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(path, "bad magic bytes")
    version, count = struct.unpack("<II", take(8))
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(path, f"unsupported format version {version}")

    state = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        try:
            name = take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(path, f"parameter name is not UTF-8: {e}") from e
        code, ndim = struct.unpack("<BI", take(5))
        if code not in NUMPY_DTYPES:
            raise CheckpointError(path, f"unknown dtype code {code} for {name}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        dtype = NUMPY_DTYPES[code]
        count_values = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(take(count_values * dtype.itemsize), dtype=dtype)
        state[name] = torch.from_numpy(values.reshape(shape).copy())
    if offset != len(data):
        raise CheckpointError(path, f"{len(data) - offset} trailing bytes")
    return state


def load_checkpoint(path: str | Path, model: nn.Module) -> None:
    """
    Copy checkpoint values into `model`; names and shapes must match exactly.
    """
    state = read_checkpoint(path)
    params = dict(model.named_parameters())
    missing = sorted(set(params) - set(state))
    unexpected = sorted(set(state) - set(params))
    if missing or unexpected:
        raise CheckpointError(
            path, f"parameter names differ: missing {missing}, unexpected {unexpected}"
        )
    for name, param in params.items():
        if tuple(state[name].shape) != tuple(param.shape):
            raise CheckpointError(
                path,
                f"{name} has shape {tuple(state[name].shape)}, model expects {tuple(param.shape)}",
            )
    with torch.no_grad():
        for name, param in params.items():
            param.copy_(state[name].to(param.dtype))
    bt.logging.debug(f"Loaded {len(params)} parameters from {path}")
