from __future__ import annotations

from typing import Iterable

import torch
from torch.optim.lr_scheduler import CosineAnnealingLR

from autodiff.errors import MissingGradientError


class CheckedAdamW(torch.optim.AdamW):
    """
    AdamW that refuses to step while any parameter is missing its gradient.

    torch silently skips parameters whose `.grad` is None; a dead parameter
    group would then go unnoticed during pre-training.
    """

    def __init__(
        self,
        params: Iterable[torch.Tensor],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        weight_decay: float = 0.0,
        eps: float = 1e-8,
    ):
        super().__init__(
            params, lr=lr, betas=betas, weight_decay=weight_decay, eps=eps
        )

    @torch.no_grad()
    def step(self, closure=None):
        index = 0
        for group in self.param_groups:
            for param in group["params"]:
                if param.grad is None:
                    raise MissingGradientError(index, tuple(param.shape))
                index += 1
        return super().step(closure)


def cosine_schedule(optimizer: torch.optim.Optimizer, steps: int) -> CosineAnnealingLR:
    """
    Cosine annealing from the base learning rate down to zero over `steps`.
    """
    return CosineAnnealingLR(optimizer, T_max=max(steps, 1), eta_min=0.0)
