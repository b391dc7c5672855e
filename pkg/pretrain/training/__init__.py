from .data_source import (
    AugmentingVolumeProcessor,
    DefaultVolumeProcessor,
    SyntheticVolumeSource,
    VolumeProcessor,
    VolumeSource,
    gen_volume,
)
from .volume_io import VolumeFormatError, read_volume, write_volume
from .metrics_writer import MetricsWriter, read_metrics
from .pretrain_session import PretrainResult, build_model, cmd_pretrain
from .reconstruct import ReconstructResult, cmd_reconstruct
from .gradcheck import GradcheckReport, cmd_gradcheck
from .ablation import AblationRow, cmd_ablate

__all__ = [
    "AugmentingVolumeProcessor",
    "DefaultVolumeProcessor",
    "SyntheticVolumeSource",
    "VolumeProcessor",
    "VolumeSource",
    "gen_volume",
    "VolumeFormatError",
    "read_volume",
    "write_volume",
    "MetricsWriter",
    "read_metrics",
    "PretrainResult",
    "build_model",
    "cmd_pretrain",
    "ReconstructResult",
    "cmd_reconstruct",
    "GradcheckReport",
    "cmd_gradcheck",
    "AblationRow",
    "cmd_ablate",
]
