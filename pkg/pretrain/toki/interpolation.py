"""
State space token interpolation.

Masked runs of a scanned token sequence are filled from the two visible tokens
that bound them, by driving a diagonal state space with a linear blend of the
endpoints. With a = a_prime per channel:

    A_bar = exp(a), B_bar = exp(a) / a, C = identity
    s_n = ((Q + 2 - n) * left + n * right) / (Q + 2),   n = 0..Q
    z_j = sum_{n=0}^{j} A_bar^(j - n) * B_bar * s_n,    j = 1..Q
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from autodiff import tensor_ops as ops
from autodiff.errors import ShapeError
from constants import DEFAULT_TOKI_INIT
from masking.serialization import TokenSequence
from models.enums import TokiVariant


@dataclass
class GapSpec:
    """
    A run of `q` masked tokens between two visible tokens, each (..., C).
    """

    left: torch.Tensor
    right: torch.Tensor
    q: int

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"Gap length must be non-negative, got {self.q}")
        if self.left.shape != self.right.shape:
            raise ShapeError("gap", self.left.shape, self.right.shape)
        if not (torch.isfinite(self.left).all() and torch.isfinite(self.right).all()):
            raise ValueError("Gap endpoints must be finite")


def blend_weights(q: int, count: int, dtype: torch.dtype) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Left and right weights (Q + 2 - n) / (Q + 2) and n / (Q + 2) for n < count.
    """
    n = torch.arange(count, dtype=dtype)
    return (q + 2 - n) / (q + 2), n / (q + 2)


class TokenInterpolation(nn.Module):
    def __init__(
        self,
        channel_dim: int,
        init: float = DEFAULT_TOKI_INIT,
        variant: TokiVariant | str = TokiVariant.EQ8,
    ):
        super().__init__()
        if init >= 0:
            raise ValueError(f"TOKI decay must be strictly negative, got init={init}")
        self.channel_dim = channel_dim
        self.variant = TokiVariant(variant)
        # a_prime = -exp(log_decay) stays negative under any update
        self.log_decay = nn.Parameter(torch.full((channel_dim,), math.log(-init)))

    @property
    def a_prime(self) -> torch.Tensor:
        return -torch.exp(self.log_decay)

    def validate(self) -> None:
        a = self.a_prime.detach()
        if not torch.isfinite(a).all() or (a >= 0).any():
            raise ValueError("TOKI decay has non-negative or non-finite entries")

    def interpolate_gap(self, gap: GapSpec) -> torch.Tensor:
        """
        Returns:
            torch.Tensor: (..., Q, C) tokens for the masked positions.
        """
        if gap.left.shape[-1] != self.channel_dim:
            raise ShapeError("interpolate_gap", gap.left.shape, (self.channel_dim,), "channels")
        q = gap.q
        dtype = gap.left.dtype
        if q == 0:
            return gap.left.new_zeros((*gap.left.shape[:-1], 0, self.channel_dim))

        a = self.a_prime.to(dtype)
        a_bar = ops.exp(a)
        b_bar = a_bar / a
        j = torch.arange(1, q + 1, dtype=dtype)

        if self.variant == TokiVariant.EQ8:
            w_left, w_right = blend_weights(q, q + 1, dtype)
            blended = torch.einsum("n,...c->...nc", w_left, gap.left) + torch.einsum(
                "n,...c->...nc", w_right, gap.right
            )
            n = torch.arange(q + 1, dtype=dtype)
            lag = j[:, None] - n[None, :]
            causal = (lag >= 0).to(dtype)
            decay = ops.exp(torch.einsum("jn,c->jnc", lag.clamp(min=0), a))
            kernel = decay * (causal[:, :, None] * b_bar)
            return torch.einsum("jnc,...nc->...jc", kernel, blended)

        # ALG3: one blend per output position, scaled by the accumulated decay
        w_left, w_right = 1 - j / (q + 2), j / (q + 2)
        blended = torch.einsum("j,...c->...jc", w_left, gap.left) + torch.einsum(
            "j,...c->...jc", w_right, gap.right
        )
        m = torch.arange(q + 1, dtype=dtype)
        partial = torch.cumsum(ops.exp(torch.einsum("m,c->mc", m, a)), dim=0)[1:]
        return blended * (partial / a)

    def fill_ranks(
        self, tokens: torch.Tensor, ranks: np.ndarray, total_length: int
    ) -> torch.Tensor:
        """
        Dense (B, total_length, C) sequence with tokens at `ranks` and every
        masked run interpolated from its bounding tokens. A masked prefix or
        suffix uses its single neighbor as both endpoints.
        """
        ranks = np.asarray(ranks, dtype=np.int64)
        count = ranks.shape[0]
        if count == 0:
            raise ValueError("TOKI needs at least one visible token")
        if tokens.shape[-2] != count:
            raise ShapeError("fill_sequence", tokens.shape, ranks.shape, "token count")
        if ranks[0] < 0 or ranks[-1] >= total_length or (np.diff(ranks) <= 0).any():
            raise ValueError("Visible ranks must be strictly increasing within the sequence")

        def token(k: int) -> torch.Tensor:
            return ops.slice_along(tokens, -2, k, k + 1).squeeze(-2)

        segments = []
        if ranks[0] > 0:
            first = token(0)
            segments.append(self.interpolate_gap(GapSpec(first, first, int(ranks[0]))))
        for k in range(count):
            segments.append(ops.slice_along(tokens, -2, k, k + 1))
            if k + 1 < count:
                q = int(ranks[k + 1] - ranks[k] - 1)
                if q:
                    segments.append(self.interpolate_gap(GapSpec(token(k), token(k + 1), q)))
        tail = int(total_length - 1 - ranks[-1])
        if tail:
            last = token(count - 1)
            segments.append(self.interpolate_gap(GapSpec(last, last, tail)))
        return ops.concat(segments, dim=-2)

    def fill_sequence(self, visible: TokenSequence, total_length: int | None = None) -> torch.Tensor:
        total_length = visible.total_length if total_length is None else total_length
        return self.fill_ranks(visible.tokens, visible.ranks, total_length)

    def forward(self, visible: TokenSequence) -> torch.Tensor:
        return self.fill_sequence(visible)
