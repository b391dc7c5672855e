"""
Finite-difference audit of every parameter group of a tiny model at 64 bits.

For each group, random unit directions v are drawn over the group's
parameters and the autograd directional derivative <grad, v> is compared
with the central difference of the loss along v.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import bittensor as bt
import torch

from autodiff.finite_difference import directional_derivative, relative_error
from autodiff.precision import default_precision
from constants import (
    FINITE_DIFFERENCE_STEP,
    GRADCHECK_DEPTH,
    GRADCHECK_DIRECTIONS,
    GRADCHECK_ERROR_FLOOR,
    GRADCHECK_MODEL_DIM,
    GRADCHECK_TOLERANCE,
    GRADCHECK_VOLUME_SHAPE,
)
from models.run_config import RunConfig
from ssm.params import SsmParams, discretize
from ssm.scan import scan_kernel, scan_recurrent
from toki.interpolation import GapSpec, TokenInterpolation
from training.data_source import SyntheticVolumeSource
from training.pretrain_session import build_model, step_pyramid
from utils.logging import create_and_print_table

GRADCHECK_BATCH_SIZE = 2

# Called on every analytic gradient before comparison; tests use it to
# inject a corrupted gradient.
GradHook = Callable[[str, torch.Tensor], torch.Tensor]
Loss = Callable[[], torch.Tensor]


@dataclass
class GroupCheck:
    group: str
    n_params: int
    max_rel_err: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= GRADCHECK_TOLERANCE


@dataclass
class GradcheckReport:
    checks: list[GroupCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[str]:
        return [check.group for check in self.checks if not check.passed]

    @property
    def groups(self) -> list[str]:
        return [check.group for check in self.checks]

    def print(self):
        rows = [
            [
                check.group,
                str(check.n_params),
                f"{check.max_rel_err:.3e}",
                "ok" if check.passed else "VIOLATION",
            ]
            for check in self.checks
        ]
        create_and_print_table(
            f"Gradient check (tolerance {GRADCHECK_TOLERANCE:g})",
            [
                ("Group", "left", "cyan"),
                ("Params", "right", "white"),
                ("Max rel. err", "right", "yellow"),
                ("Status", "center", "green"),
            ],
            rows,
        )


def tiny_config(config: RunConfig) -> RunConfig:
    return config.with_overrides(
        {
            "volume_shape": GRADCHECK_VOLUME_SHAPE,
            "model_dim": GRADCHECK_MODEL_DIM,
            "depth": GRADCHECK_DEPTH,
            "batch_size": GRADCHECK_BATCH_SIZE,
            "precision": 64,
        }
    )


def check_group(
    name: str,
    loss_fn: Loss,
    params: list[tuple[str, torch.Tensor]],
    generator: torch.Generator,
    grad_hook: GradHook | None = None,
) -> GroupCheck:
    tensors = [p for _, p in params]
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    grads = []
    for param_name, t in params:
        grad = t.grad if t.grad is not None else torch.zeros_like(t)
        grads.append(grad_hook(param_name, grad) if grad_hook else grad)

    worst = 0.0
    for _ in range(GRADCHECK_DIRECTIONS):
        directions = [torch.randn(t.shape, generator=generator, dtype=t.dtype) for t in tensors]
        norm = torch.sqrt(sum((d * d).sum() for d in directions))
        directions = [d / norm for d in directions]
        analytic = sum((g * d).sum() for g, d in zip(grads, directions)).item()
        numeric = directional_derivative(loss_fn, tensors, directions, FINITE_DIFFERENCE_STEP)
        worst = max(worst, relative_error(analytic, numeric, GRADCHECK_ERROR_FLOOR))
    return GroupCheck(name, sum(t.numel() for t in tensors), worst)


def _scan_checks(generator: torch.Generator, grad_hook: GradHook | None) -> list[GroupCheck]:
    A = -torch.rand(4, generator=generator, dtype=torch.float64) - 0.5
    B = torch.randn(4, generator=generator, dtype=torch.float64)
    C = torch.randn(4, generator=generator, dtype=torch.float64)
    for t in (A, B, C):
        t.requires_grad_(True)
    x = torch.randn(12, generator=generator, dtype=torch.float64)
    delta = torch.tensor(0.3, dtype=torch.float64)

    def recurrent() -> torch.Tensor:
        d = discretize(SsmParams(A, B, C), delta)
        return (scan_recurrent(d, C, x) ** 2).sum()

    def kernel() -> torch.Tensor:
        d = discretize(SsmParams(A, B, C), delta)
        return (scan_kernel(d, C, x) ** 2).sum()

    params = [("ssm.A", A), ("ssm.B", B), ("ssm.C", C)]
    return [
        check_group("scan_recurrent", recurrent, params, generator, grad_hook),
        check_group("scan_kernel", kernel, params, generator, grad_hook),
    ]


def _toki_check(
    config: RunConfig, generator: torch.Generator, grad_hook: GradHook | None
) -> GroupCheck:
    toki = TokenInterpolation(3, config.toki.init, config.toki.variant)
    left = torch.randn(3, generator=generator, dtype=torch.float64)
    right = torch.randn(3, generator=generator, dtype=torch.float64)

    def loss() -> torch.Tensor:
        return (toki.interpolate_gap(GapSpec(left, right, 4)) ** 2).sum()

    return check_group(
        "interpolate_gap", loss, [("toki.log_decay", toki.log_decay)], generator, grad_hook
    )


def cmd_gradcheck(config: RunConfig, grad_hook: GradHook | None = None) -> GradcheckReport:
    """
    Returns:
        GradcheckReport: One row per check; `passed` is False on any violation.
    """
    config = tiny_config(config)
    report = GradcheckReport()
    generator = torch.Generator().manual_seed(config.seed)

    with default_precision(64) as dtype:
        report.checks.extend(_scan_checks(generator, grad_hook))
        report.checks.append(_toki_check(config, generator, grad_hook))

        model = build_model(config)
        volumes = SyntheticVolumeSource(config).batch(1, config.batch_size, dtype)
        pyramid = step_pyramid(config, 1)

        def loss() -> torch.Tensor:
            return model.reconstruct(volumes, pyramid).loss

        for group, params in model.parameter_groups().items():
            check = check_group(group, loss, params, generator, grad_hook)
            report.checks.append(check)
            bt.logging.debug(f"gradcheck {group}: max rel. err {check.max_rel_err:.3e}")

    report.print()
    if report.passed:
        bt.logging.success("Gradient check passed")
    else:
        bt.logging.error(f"Gradient check violated by: {', '.join(report.failures)}")
    return report
