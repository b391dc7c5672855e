from __future__ import annotations

from enum import Enum


class ScanOrder(str, Enum):
    """
    Order in which a 3D grid is flattened into a token sequence.
    """

    RASTER = "raster"
    ZIGZAG = "zigzag"
    HILBERT = "hilbert"
    SHUFFLE = "shuffle"

    def __str__(self):
        return self.value

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str) and value.lower() != value:
            return cls(value.lower())
        raise ValueError(f"Cannot convert {value} to {cls.__name__}")


class TokiVariant(str, Enum):
    """
    EQ8 sums over the blended endpoint sequence inside the state space sum.
    ALG3 blends once per output position and scales by the summed decay.
    """

    EQ8 = "eq8"
    ALG3 = "alg3"

    def __str__(self):
        return self.value


class MaskStrategy(str, Enum):
    """
    BOTTOM_UP draws the coarsest mask and upsamples it to every finer stage.
    INDEPENDENT draws each stage on its own, so the convolution stages and
    the Mamba stage see unrelated masks.
    """

    BOTTOM_UP = "bottom_up"
    INDEPENDENT = "independent"

    def __str__(self):
        return self.value


class MaskFill(str, Enum):
    TOKI = "toki"
    LEARNABLE = "learnable"

    def __str__(self):
        return self.value


class AblationAxis(str, Enum):
    MASK_RATIO = "mask_ratio"
    SCAN_ORDER = "scan_order"
    FILL = "fill"
    SKIP = "skip"
    MASKING = "masking"

    def __str__(self):
        return self.value
