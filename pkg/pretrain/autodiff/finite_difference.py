"""
Central finite differences used as the oracle for reverse-mode gradients.
All checks are meant to run at 64-bit precision.
"""

from __future__ import annotations

from typing import Callable, Sequence

import torch

from constants import FINITE_DIFFERENCE_STEP

LossFn = Callable[[], torch.Tensor]


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    """
    |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
    turning rounding noise into large relative errors.
    """
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def numeric_gradient(
    fn: LossFn, tensor: torch.Tensor, h: float = FINITE_DIFFERENCE_STEP
) -> torch.Tensor:
    """
    Full central-difference gradient of the scalar `fn()` with respect to `tensor`.
    Only meant for small tensors: costs two evaluations per entry.
    """
    grad = torch.zeros_like(tensor)
    flat = tensor.data.view(-1)
    grad_flat = grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            original = flat[i].item()
            flat[i] = original + h
            plus = fn().item()
            flat[i] = original - h
            minus = fn().item()
            flat[i] = original
            grad_flat[i] = (plus - minus) / (2 * h)
    return grad


def directional_derivative(
    fn: LossFn,
    tensors: Sequence[torch.Tensor],
    directions: Sequence[torch.Tensor],
    h: float = FINITE_DIFFERENCE_STEP,
) -> float:
    """
    Central difference of `fn` along the joint direction `directions`.
    Tensors are restored bit-exactly afterwards.
    """
    saved = [t.detach().clone() for t in tensors]
    try:
        with torch.no_grad():
            for t, d in zip(tensors, directions):
                t.add_(d, alpha=h)
            plus = fn().item()
            for t, s, d in zip(tensors, saved, directions):
                t.copy_(s)
                t.add_(d, alpha=-h)
            minus = fn().item()
    finally:
        with torch.no_grad():
            for t, s in zip(tensors, saved):
                t.copy_(s)
    return (plus - minus) / (2 * h)


def max_gradient_error(
    fn: LossFn, tensors: Sequence[torch.Tensor], h: float = FINITE_DIFFERENCE_STEP
) -> float:
    """
    Largest entrywise relative error between autograd and central differences
    over every entry of every tensor in `tensors`.
    """
    for t in tensors:
        t.grad = None
    fn().backward()
    analytic = [t.grad.detach().clone() for t in tensors]
    worst = 0.0
    for t, grad in zip(tensors, analytic):
        numeric = numeric_gradient(fn, t, h)
        for a, n in zip(grad.view(-1).tolist(), numeric.view(-1).tolist()):
            worst = max(worst, relative_error(a, n))
    return worst
