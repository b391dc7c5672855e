from .mask_pyramid import (
    MaskConsistencyError,
    MaskPyramid,
    build_independent_pyramid,
    build_mask_pyramid,
    downsample_mask,
    masked_voxel_count,
    pyramid_for_volume,
)
from .sparse_ops import (
    SparseConv3d,
    SparseFeature,
    SparseLayerNorm,
    sparse_max_pool,
    sparse_op,
    sparse_silu,
)
from .scan_orders import scan_order, inverse_permutation
from .serialization import TokenSequence, serialize, deserialize, sequence_to_grid

__all__ = [
    "MaskConsistencyError",
    "MaskPyramid",
    "build_independent_pyramid",
    "build_mask_pyramid",
    "downsample_mask",
    "masked_voxel_count",
    "pyramid_for_volume",
    "SparseConv3d",
    "SparseFeature",
    "SparseLayerNorm",
    "sparse_max_pool",
    "sparse_op",
    "sparse_silu",
    "scan_order",
    "inverse_permutation",
    "TokenSequence",
    "serialize",
    "deserialize",
    "sequence_to_grid",
]
