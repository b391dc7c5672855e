"""
Shape-checked tensor operations.

Every operation validates its operands before dispatching to torch, so that a
mismatch surfaces as a ShapeError naming the operation instead of silently
broadcasting. The only implicit broadcast allowed is scalar-tensor; anything
else has to go through `expand`.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from autodiff.errors import ShapeError

Tensor = torch.Tensor
IndexLike = Tensor | np.ndarray | Sequence[int]


def _check_same_or_scalar(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.dim() != 0 and b.dim() != 0:
        raise ShapeError(op, a.shape, b.shape)


def _as_index(index: IndexLike, device: torch.device) -> Tensor:
    if isinstance(index, Tensor):
        index = index.to(device=device, dtype=torch.long)
    else:
        index = torch.as_tensor(np.asarray(index, dtype=np.int64), device=device)
    if index.dim() != 1:
        raise ShapeError("index", tuple(index.shape), detail="index must be 1-D")
    return index


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_or_scalar("add", a, b)
    return a + b


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_or_scalar("sub", a, b)
    return a - b


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_or_scalar("mul", a, b)
    return a * b


def scale(a: Tensor, factor: float) -> Tensor:
    return a * factor


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product. Leading batch dimensions must agree exactly.
    """
    if a.dim() == 0 or b.dim() == 0:
        raise ShapeError("matmul", a.shape, b.shape, "operands must be at least 1-D")
    inner_b = b.shape[0] if b.dim() == 1 else b.shape[-2]
    if a.shape[-1] != inner_b:
        raise ShapeError("matmul", a.shape, b.shape, "inner extents differ")
    if a.dim() > 2 and b.dim() > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("matmul", a.shape, b.shape, "batch extents differ")
    return torch.matmul(a, b)


def exp(x: Tensor) -> Tensor:
    return torch.exp(x)


def expm1(x: Tensor) -> Tensor:
    return torch.expm1(x)


def softplus(x: Tensor) -> Tensor:
    return F.softplus(x)


def sigmoid(x: Tensor) -> Tensor:
    return torch.sigmoid(x)


def silu(x: Tensor) -> Tensor:
    return F.silu(x)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if math.prod(shape) != x.numel():
        raise ShapeError("reshape", x.shape, shape, "element counts differ")
    return x.reshape(shape)


def permute(x: Tensor, dims: Sequence[int]) -> Tensor:
    dims = tuple(dims)
    if sorted(dims) != list(range(x.dim())):
        raise ShapeError("permute", x.shape, dims, "dims must be a permutation")
    return x.permute(dims)


def concat(xs: Sequence[Tensor], dim: int) -> Tensor:
    if not xs:
        raise ValueError("concat: at least one tensor is required")
    first = xs[0]
    axis = dim % first.dim()
    for other in xs[1:]:
        if other.dim() != first.dim() or any(
            other.shape[i] != first.shape[i] for i in range(first.dim()) if i != axis
        ):
            raise ShapeError("concat", first.shape, other.shape)
    return torch.cat(list(xs), dim=axis)


def slice_along(x: Tensor, dim: int, start: int, stop: int) -> Tensor:
    extent = x.shape[dim]
    if not 0 <= start <= stop <= extent:
        raise ShapeError(
            "slice", x.shape, detail=f"range [{start}, {stop}) outside extent {extent}"
        )
    return x.narrow(dim, start, stop - start)


def gather(x: Tensor, index: IndexLike, dim: int = 0) -> Tensor:
    """
    Select entries of `x` along `dim` by an index list.
    """
    index = _as_index(index, x.device)
    extent = x.shape[dim]
    if index.numel() and (int(index.min()) < 0 or int(index.max()) >= extent):
        raise ShapeError("gather", x.shape, detail=f"index outside extent {extent}")
    return torch.index_select(x, dim, index)


def scatter(base: Tensor, index: IndexLike, src: Tensor, dim: int = 0) -> Tensor:
    """
    Out-of-place scatter: a copy of `base` whose slices at `index` along `dim`
    are replaced by `src`. Indices must be distinct.
    """
    index = _as_index(index, base.device)
    axis = dim % base.dim()
    expected = tuple(
        index.numel() if i == axis else base.shape[i] for i in range(base.dim())
    )
    if tuple(src.shape) != expected:
        raise ShapeError("scatter", src.shape, expected)
    if index.numel() and (int(index.min()) < 0 or int(index.max()) >= base.shape[axis]):
        raise ShapeError(
            "scatter", base.shape, detail=f"index outside extent {base.shape[axis]}"
        )
    if torch.unique(index).numel() != index.numel():
        raise ValueError("scatter: duplicate indices")
    return torch.index_copy(base, axis, index, src)


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if x.dim() != len(shape) or any(
        s != t and s != 1 for s, t in zip(x.shape, shape)
    ):
        raise ShapeError("expand", x.shape, shape)
    return x.expand(shape)


def conv3d(
    x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: int = 0
) -> Tensor:
    """
    Direct 3D convolution of a (B, C_in, D, H, W) volume with zero padding.
    """
    if x.dim() != 5 or weight.dim() != 5:
        raise ShapeError("conv3d", x.shape, weight.shape, "expected 5-D operands")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError("conv3d", x.shape, weight.shape, "input channels differ")
    if bias is not None and tuple(bias.shape) != (weight.shape[0],):
        raise ShapeError("conv3d", bias.shape, (weight.shape[0],), "bias extent")
    return F.conv3d(x, weight, bias, padding=padding)


def max_pool2x(x: Tensor) -> Tensor:
    if x.dim() != 5 or any(s % 2 for s in x.shape[2:]):
        raise ShapeError("max_pool2x", x.shape, detail="spatial extents must be even")
    return F.max_pool3d(x, kernel_size=2, stride=2)


def upsample2x(x: Tensor) -> Tensor:
    """
    Nearest-neighbour 2x upsampling of the three trailing spatial axes.
    """
    if x.dim() < 3:
        raise ShapeError("upsample2x", x.shape, detail="expected 3 spatial axes")
    for axis in (-3, -2, -1):
        x = x.repeat_interleave(2, dim=axis)
    return x


def sum(x: Tensor, dim: int | tuple[int, ...] | None = None) -> Tensor:
    return x.sum() if dim is None else x.sum(dim=dim)


def mean(x: Tensor, dim: int | tuple[int, ...] | None = None) -> Tensor:
    return x.mean() if dim is None else x.mean(dim=dim)


def backward(loss: Tensor) -> None:
    """
    Populate `.grad` of every leaf that requires grad. Gradients accumulate
    across calls until `zero_grad`.
    """
    if loss.dim() != 0:
        raise ShapeError("backward", loss.shape, (), "loss must be a scalar")
    if not loss.requires_grad:
        raise ValueError("backward: loss was not produced from differentiable inputs")
    loss.backward()


def zero_grad(params: Sequence[Tensor]) -> None:
    for param in params:
        if param.grad is not None:
            param.grad.zero_()
