from __future__ import annotations


class ShapeError(ValueError):
    """
    Raised when the operands of a tensor operation do not conform.
    Carries the operation name and both offending shapes.
    """

    def __init__(
        self,
        op: str,
        left_shape: tuple[int, ...],
        right_shape: tuple[int, ...] | None = None,
        detail: str = "",
    ):
        self.op = op
        self.left_shape = tuple(left_shape)
        self.right_shape = tuple(right_shape) if right_shape is not None else None
        message = f"{op}: shape mismatch {self.left_shape}"
        if self.right_shape is not None:
            message += f" vs {self.right_shape}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class MissingGradientError(ValueError):
    """
    Raised when an optimizer step is requested for a parameter without a gradient.
    """

    def __init__(self, index: int, shape: tuple[int, ...]):
        self.index = index
        self.shape = tuple(shape)
        super().__init__(
            f"Parameter #{index} with shape {self.shape} has no gradient; "
            "run backward before stepping"
        )
