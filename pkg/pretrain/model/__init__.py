from .encoder import EncoderOutput, HybridEncoder, stage_widths
from .decoder import HybridDecoder
from .hybrid import HybridMaskedAutoencoder, ReconBatch, parameter_group
from .loss import masked_mse
from .checkpoint import CheckpointError, load_checkpoint, read_checkpoint, save_checkpoint

__all__ = [
    "EncoderOutput",
    "HybridEncoder",
    "stage_widths",
    "HybridDecoder",
    "HybridMaskedAutoencoder",
    "ReconBatch",
    "parameter_group",
    "masked_mse",
    "CheckpointError",
    "load_checkpoint",
    "read_checkpoint",
    "save_checkpoint",
]
