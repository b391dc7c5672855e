from __future__ import annotations

import math

import torch
from torch import nn

from autodiff import tensor_ops as ops
from constants import (
    CAUSAL_CONV_WIDTH,
    DEFAULT_EXPAND,
    DEFAULT_STATE_DIM,
    DELTA_INIT_MAX,
    DELTA_INIT_MIN,
)
from ssm.scan import selective_scan


class MambaBlock(nn.Module):
    """
    Selective state space block with a residual connection.

    u = SiLU(causal_conv(in_proj(x)))
    delta = softplus(delta_proj(u)), B = b_proj(u), C = c_proj(u)
    out = x + out_proj(selective_scan(u, delta, A, B, C) * SiLU(gate_proj(x)))

    A is kept strictly negative through A = -exp(A_log) and starts at
    A_n = -(n + 1).
    """

    def __init__(
        self,
        model_dim: int,
        state_dim: int = DEFAULT_STATE_DIM,
        expand: int = DEFAULT_EXPAND,
        causal_conv: bool = True,
        zero_init_out: bool = False,
    ):
        super().__init__()
        self.model_dim = model_dim
        self.state_dim = state_dim
        self.inner_dim = expand * model_dim

        self.in_proj = nn.Linear(model_dim, self.inner_dim)
        self.causal_conv = (
            nn.Conv1d(
                self.inner_dim,
                self.inner_dim,
                kernel_size=CAUSAL_CONV_WIDTH,
                groups=self.inner_dim,
                padding=CAUSAL_CONV_WIDTH - 1,
            )
            if causal_conv
            else None
        )
        self.delta_proj = nn.Linear(self.inner_dim, self.inner_dim)
        self.b_proj = nn.Linear(self.inner_dim, state_dim, bias=False)
        self.c_proj = nn.Linear(self.inner_dim, state_dim, bias=False)
        self.gate_proj = nn.Linear(model_dim, self.inner_dim)
        self.out_proj = nn.Linear(self.inner_dim, model_dim)

        A = torch.arange(1, state_dim + 1, dtype=torch.get_default_dtype())
        self.A_log = nn.Parameter(torch.log(A).repeat(self.inner_dim, 1))
        self._init_delta_bias()
        if zero_init_out:
            nn.init.zeros_(self.out_proj.weight)
            nn.init.zeros_(self.out_proj.bias)

    def _init_delta_bias(self) -> None:
        # softplus(bias) log-uniform in [DELTA_INIT_MIN, DELTA_INIT_MAX]
        delta = torch.exp(
            torch.rand(self.inner_dim)
            * (math.log(DELTA_INIT_MAX) - math.log(DELTA_INIT_MIN))
            + math.log(DELTA_INIT_MIN)
        )
        inverse_softplus = delta + torch.log(-torch.expm1(-delta))
        with torch.no_grad():
            self.delta_proj.bias.copy_(inverse_softplus)
            self.delta_proj.weight.mul_(0.1)

    @property
    def A(self) -> torch.Tensor:
        return -torch.exp(self.A_log)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        """
        Args:
            tokens (torch.Tensor): (batch, K, model_dim) or (K, model_dim).

        Returns:
            torch.Tensor: Same shape as `tokens`.
        """
        unbatched = tokens.dim() == 2
        if unbatched:
            tokens = tokens.unsqueeze(0)
        if tokens.dim() != 3 or tokens.shape[1] == 0:
            raise ValueError(
                f"mamba_block: expected a non-empty token sequence, got shape {tuple(tokens.shape)}"
            )
        length = tokens.shape[1]

        u = self.in_proj(tokens)
        if self.causal_conv is not None:
            conv = self.causal_conv(ops.permute(u, (0, 2, 1)))
            u = ops.permute(ops.slice_along(conv, 2, 0, length), (0, 2, 1))
        u = ops.silu(u)

        delta = ops.softplus(self.delta_proj(u))
        y = selective_scan(u, delta, self.A, self.b_proj(u), self.c_proj(u))
        y = ops.mul(y, ops.silu(self.gate_proj(tokens)))
        out = ops.add(tokens, self.out_proj(y))
        return out.squeeze(0) if unbatched else out
