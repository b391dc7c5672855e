from .interpolation import GapSpec, TokenInterpolation, blend_weights
from .learnable_fill import LearnableTokenFill

__all__ = ["GapSpec", "TokenInterpolation", "blend_weights", "LearnableTokenFill"]
