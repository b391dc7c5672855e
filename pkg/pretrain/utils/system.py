from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import psutil
import torch
from bittensor import logging


def prepare_out_dir(out_dir: str | Path) -> Path:
    """
    Create the run directory, surfacing the path on failure.
    """
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logging.error(f"Failed to create output directory {path}: {e}")
        raise RuntimeError(f"Failed to create output directory {path}: {e}") from e
    return path


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def system_specs() -> dict[str, int | float | str]:
    specs = {
        "cpu_physical": psutil.cpu_count(logical=False),
        "cpu_logical": psutil.cpu_count(logical=True),
        "memory": psutil.virtual_memory().total,
        "torch_threads": torch.get_num_threads(),
    }
    freq = psutil.cpu_freq()
    if freq is not None:
        specs["cpu_freq"] = freq.max
    if torch.cuda.is_available():
        specs["gpu_name"] = torch.cuda.get_device_name(0)
    return specs
