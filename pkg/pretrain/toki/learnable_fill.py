from __future__ import annotations

import numpy as np
import torch
from torch import nn

from autodiff import tensor_ops as ops
from constants import TOKEN_INIT_STD
from masking.serialization import TokenSequence


class LearnableTokenFill(nn.Module):
    """
    Baseline mask filling: every masked position of the sequence takes one
    shared learnable token.
    """

    def __init__(self, channel_dim: int):
        super().__init__()
        self.channel_dim = channel_dim
        self.token = nn.Parameter(torch.zeros(channel_dim))
        nn.init.normal_(self.token, std=TOKEN_INIT_STD)

    def fill_ranks(
        self, tokens: torch.Tensor, ranks: np.ndarray, total_length: int
    ) -> torch.Tensor:
        if len(ranks) == 0:
            raise ValueError("Mask filling needs at least one visible token")
        shape = (tokens.shape[0], total_length, self.channel_dim)
        base = ops.expand(self.token.to(tokens.dtype).view(1, 1, -1), shape).contiguous()
        return ops.scatter(base, ranks, tokens, dim=1)

    def fill_sequence(self, visible: TokenSequence, total_length: int | None = None) -> torch.Tensor:
        total_length = visible.total_length if total_length is None else total_length
        return self.fill_ranks(visible.tokens, visible.ranks, total_length)

    def forward(self, visible: TokenSequence) -> torch.Tensor:
        return self.fill_sequence(visible)
