"""
Recurrent, convolution-kernel and batched selective forms of the discretized
state space scan. All three emit y_i after updating h_i, so the first kernel
tap C * B_bar acts at lag zero.
"""

from __future__ import annotations

import torch

from autodiff import tensor_ops as ops
from autodiff.errors import ShapeError
from ssm.params import DiscretizedSsm


def _output_map(C: torch.Tensor, length: int, state_dim: int) -> torch.Tensor:
    shape = (length, state_dim)
    if C.dim() == 1:
        return ops.expand(C.unsqueeze(0), shape)
    if tuple(C.shape) != shape:
        raise ShapeError("scan", C.shape, shape, "output map")
    return C


def scan_recurrent(
    d: DiscretizedSsm,
    C: torch.Tensor,
    x: torch.Tensor,
    return_states: bool = False,
) -> torch.Tensor | tuple[torch.Tensor, torch.Tensor]:
    """
    h_0 = 0, h_i = A_bar_i * h_{i-1} + B_bar_i * x_i, y_i = C_i . h_i

    Args:
        d (DiscretizedSsm): Time-invariant or per-token discretization.
        C (torch.Tensor): Output map, (N,) or (L, N).
        x (torch.Tensor): Scalar input sequence of length L >= 1.
        return_states (bool): Also return the (L, N) hidden states.
    """
    if x.dim() != 1 or x.shape[0] < 1:
        raise ShapeError("scan_recurrent", x.shape, detail="x must be a non-empty vector")
    length = x.shape[0]
    A_bar, B_bar = d.per_token(length)
    C = _output_map(C, length, d.state_dim)

    h = torch.zeros(d.state_dim, dtype=x.dtype, device=x.device)
    outputs, states = [], []
    for i in range(length):
        h = ops.add(ops.mul(A_bar[i], h), ops.mul(B_bar[i], x[i]))
        outputs.append(ops.sum(ops.mul(C[i], h)))
        states.append(h)
    y = torch.stack(outputs)
    if return_states:
        return y, torch.stack(states)
    return y


def ssm_kernel(d: DiscretizedSsm, C: torch.Tensor, length: int) -> torch.Tensor:
    """
    K = (C B_bar, C A_bar B_bar, ..., C A_bar^(L-1) B_bar)
    """
    if not d.is_time_invariant:
        raise ValueError(
            "scan_kernel: the convolution form needs a time-invariant discretization"
        )
    if C.dim() != 1:
        raise ValueError("scan_kernel: the output map must be constant over the sequence")
    lags = torch.arange(length, dtype=d.A_bar.dtype, device=d.A_bar.device)
    shape = (length, d.state_dim)
    powers = torch.pow(
        ops.expand(d.A_bar.unsqueeze(0), shape), ops.expand(lags.unsqueeze(1), shape)
    )
    taps = ops.mul(C, d.B_bar)
    return ops.sum(ops.mul(powers, ops.expand(taps.unsqueeze(0), shape)), dim=1)


def scan_kernel(d: DiscretizedSsm, C: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """
    Causal convolution y = x * K with the materialized SSM kernel.
    """
    if x.dim() != 1 or x.shape[0] < 1:
        raise ShapeError("scan_kernel", x.shape, detail="x must be a non-empty vector")
    length = x.shape[0]
    kernel = ssm_kernel(d, C, length)
    rows = torch.arange(length, device=x.device)
    lag = (rows.unsqueeze(1) - rows.unsqueeze(0)).clamp(min=0)
    causal = torch.tril(torch.ones(length, length, dtype=x.dtype, device=x.device))
    toeplitz = ops.mul(ops.reshape(ops.gather(kernel, lag.reshape(-1)), (length, length)), causal)
    return ops.matmul(toeplitz, x)


def selective_scan(
    u: torch.Tensor,
    delta: torch.Tensor,
    A: torch.Tensor,
    B: torch.Tensor,
    C: torch.Tensor,
) -> torch.Tensor:
    """
    Per-channel selective scan over a batch of sequences.

    Args:
        u (torch.Tensor): Inputs, (batch, L, D).
        delta (torch.Tensor): Positive step sizes, (batch, L, D).
        A (torch.Tensor): Negative diagonal state matrices, (D, N).
        B (torch.Tensor): Input-dependent input maps, (batch, L, N).
        C (torch.Tensor): Input-dependent output maps, (batch, L, N).

    Returns:
        torch.Tensor: Outputs, (batch, L, D).
    """
    batch, length, channels = u.shape
    state_dim = A.shape[1]
    if delta.shape != u.shape:
        raise ShapeError("selective_scan", delta.shape, u.shape, "delta")
    if tuple(A.shape) != (channels, state_dim):
        raise ShapeError("selective_scan", A.shape, (channels, state_dim), "A")
    for name, value in (("B", B), ("C", C)):
        if tuple(value.shape) != (batch, length, state_dim):
            raise ShapeError("selective_scan", value.shape, (batch, length, state_dim), name)

    full = (batch, length, channels, state_dim)
    delta_a = ops.mul(
        ops.expand(delta.unsqueeze(-1), full), ops.expand(A.view(1, 1, channels, state_dim), full)
    )
    A_bar = ops.exp(delta_a)
    B_bar = ops.mul(
        ops.expm1(delta_a) / ops.expand(A.view(1, 1, channels, state_dim), full),
        ops.expand(B.unsqueeze(2), full),
    )
    drive = ops.mul(B_bar, ops.expand(u.unsqueeze(-1), full))
    C_full = ops.expand(C.unsqueeze(2), full)

    h = torch.zeros(batch, channels, state_dim, dtype=u.dtype, device=u.device)
    outputs = []
    for i in range(length):
        h = ops.add(ops.mul(A_bar[:, i], h), drive[:, i])
        outputs.append(ops.sum(ops.mul(C_full[:, i], h), dim=-1))
    return torch.stack(outputs, dim=1)
