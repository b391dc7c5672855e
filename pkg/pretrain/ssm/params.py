from __future__ import annotations

from dataclasses import dataclass

import torch

from autodiff import tensor_ops as ops
from autodiff.errors import ShapeError


@dataclass
class SsmParams:
    """
    Diagonal state space parameters of a single channel.

    Attributes:
        A (torch.Tensor): Diagonal state matrix as a length-N vector, strictly negative.
        B (torch.Tensor): Input map, length N, or (L, N) when input-dependent.
        C (torch.Tensor): Output map, length N, or (L, N) when input-dependent.
    """

    A: torch.Tensor
    B: torch.Tensor
    C: torch.Tensor

    def __post_init__(self):
        if self.A.dim() != 1 or self.A.numel() < 1:
            raise ShapeError("SsmParams", self.A.shape, detail="A must be a vector")
        if bool((self.A >= 0).any()):
            raise ValueError("SsmParams: every entry of A must be strictly negative")
        for name, value in (("B", self.B), ("C", self.C)):
            if value.shape[-1] != self.state_dim or value.dim() not in (1, 2):
                raise ShapeError(f"SsmParams.{name}", value.shape, self.A.shape)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]


@dataclass
class DiscretizedSsm:
    """
    Zero-order-hold discretization. A_bar and B_bar are (N,) for a
    time-invariant system and (L, N) when the step size varies per token.
    """

    A_bar: torch.Tensor
    B_bar: torch.Tensor

    def __post_init__(self):
        if self.A_bar.shape != self.B_bar.shape:
            raise ShapeError("DiscretizedSsm", self.A_bar.shape, self.B_bar.shape)

    @property
    def is_time_invariant(self) -> bool:
        return self.A_bar.dim() == 1

    @property
    def state_dim(self) -> int:
        return self.A_bar.shape[-1]

    def per_token(self, length: int) -> tuple[torch.Tensor, torch.Tensor]:
        """
        (L, N) views of A_bar and B_bar, expanding a time-invariant system.
        """
        if self.is_time_invariant:
            shape = (length, self.state_dim)
            return (
                ops.expand(self.A_bar.unsqueeze(0), shape),
                ops.expand(self.B_bar.unsqueeze(0), shape),
            )
        if self.A_bar.shape[0] != length:
            raise ShapeError(
                "scan", self.A_bar.shape, (length,), "sequence length differs"
            )
        return self.A_bar, self.B_bar


def discretize(params: SsmParams, delta: torch.Tensor | float) -> DiscretizedSsm:
    """
    A_bar = exp(delta * A), B_bar = (exp(delta * A) - 1) / A * B.

    With a diagonal A the (delta A)^-1 and delta factors of the ZOH rule cancel
    to 1/A elementwise. `delta` is a positive scalar (time-invariant) or a
    length-L vector (one step per token).
    """
    A = params.A
    delta = torch.as_tensor(delta, dtype=A.dtype, device=A.device)
    if delta.dim() > 1:
        raise ShapeError("discretize", delta.shape, detail="delta must be 0-D or 1-D")
    if bool((delta <= 0).any()):
        raise ValueError("discretize: delta must be strictly positive")

    if delta.dim() == 0:
        delta_a = ops.mul(delta, A)
        B = params.B
        if B.dim() != 1:
            raise ShapeError("discretize", B.shape, A.shape, "per-token B needs per-token delta")
    else:
        shape = (delta.shape[0], params.state_dim)
        delta_a = ops.mul(
            ops.expand(delta.unsqueeze(-1), shape), ops.expand(A.unsqueeze(0), shape)
        )
        B = params.B if params.B.dim() == 2 else ops.expand(params.B.unsqueeze(0), shape)
        if tuple(B.shape) != shape:
            raise ShapeError("discretize", B.shape, shape)

    A_bar = ops.exp(delta_a)
    inverse_a = A if delta_a.dim() == 1 else ops.expand(A.unsqueeze(0), delta_a.shape)
    B_bar = ops.mul(ops.expm1(delta_a) / inverse_a, B)
    return DiscretizedSsm(A_bar=A_bar, B_bar=B_bar)
