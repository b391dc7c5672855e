from .errors import ShapeError, MissingGradientError
from .precision import dtype_for, default_precision
from .optim import CheckedAdamW, cosine_schedule
from . import tensor_ops

__all__ = [
    "ShapeError",
    "MissingGradientError",
    "dtype_for",
    "default_precision",
    "CheckedAdamW",
    "cosine_schedule",
    "tensor_ops",
]
