from contextlib import contextmanager
from typing import Iterator

import torch

_DTYPES = {32: torch.float32, 64: torch.float64}


def dtype_for(precision: int) -> torch.dtype:
    """
    Map a precision in bits onto the torch floating point dtype.
    """
    if precision not in _DTYPES:
        raise ValueError(f"Unsupported precision {precision}, expected 32 or 64")
    return _DTYPES[precision]


@contextmanager
def default_precision(precision: int) -> Iterator[torch.dtype]:
    """
    Temporarily switch the torch default dtype. Gradient checks run inside
    `default_precision(64)`; training defaults to 32 bits.
    """
    dtype = dtype_for(precision)
    previous = torch.get_default_dtype()
    torch.set_default_dtype(dtype)
    try:
        yield dtype
    finally:
        torch.set_default_dtype(previous)
