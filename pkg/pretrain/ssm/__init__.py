from .params import SsmParams, DiscretizedSsm, discretize
from .scan import scan_recurrent, scan_kernel, selective_scan
from .mamba_block import MambaBlock

__all__ = [
    "SsmParams",
    "DiscretizedSsm",
    "discretize",
    "scan_recurrent",
    "scan_kernel",
    "selective_scan",
    "MambaBlock",
]
