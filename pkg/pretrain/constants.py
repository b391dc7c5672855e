from dataclasses import dataclass


@dataclass
class Commands:
    PRETRAIN = "pretrain"
    RECONSTRUCT = "reconstruct"
    GRADCHECK = "gradcheck"
    ABLATE = "ablate"


# Architecture defaults (desk scale; the full-scale model is a config choice)
DEFAULT_VOLUME_SHAPE = (16, 16, 16)
DEFAULT_N_STAGES = 3
DEFAULT_MODEL_DIM = 32
DEFAULT_DEPTH = 2
DEFAULT_STATE_DIM = 8
DEFAULT_EXPAND = 1
DEFAULT_CNN_WIDTH = 8
DEFAULT_DECODER_WIDTH = 16
CAUSAL_CONV_WIDTH = 3

# Mamba step-size initialization range for softplus(bias)
DELTA_INIT_MIN = 0.01
DELTA_INIT_MAX = 0.1

# Masking
DEFAULT_MASK_RATIO = 0.75
DEFAULT_TOKI_INIT = -1.0

# Optimization
DEFAULT_LR = 1e-4
DEFAULT_WEIGHT_DECAY = 0.05
DEFAULT_BETAS = (0.9, 0.95)
DEFAULT_BATCH_SIZE = 8
DEFAULT_STEPS = 100
LAYER_NORM_EPS = 1e-5
POSITION_EMBEDDING_STD = 0.02
TOKEN_INIT_STD = 0.02

# Synthetic data
DEFAULT_BACKGROUND = 0.05
DEFAULT_MIN_BLOBS = 1
DEFAULT_MAX_BLOBS = 4
BLOB_INTENSITY_RANGE = (0.4, 1.0)

# Finite-difference checking
FINITE_DIFFERENCE_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_ERROR_FLOOR = 1e-6
GRADCHECK_DIRECTIONS = 3
GRADCHECK_VOLUME_SHAPE = (8, 8, 8)
GRADCHECK_MODEL_DIM = 16
GRADCHECK_DEPTH = 1

# Ablation sweeps
ABLATION_MASK_RATIOS = (0.25, 0.5, 0.75, 0.8, 0.9)
ABLATION_SCAN_ORDERS = ("raster", "zigzag", "hilbert", "shuffle")
ABLATION_FILLS = ("toki", "learnable")
ABLATION_SKIP = (True, False)
ABLATION_MASKINGS = ("bottom_up", "independent")
FINAL_LOSS_WINDOW = 10

# File formats
CHECKPOINT_MAGIC = b"MMIM"
CHECKPOINT_FORMAT_VERSION = 1
VOLUME_MAGIC = b"MVOL"
METRICS_FILENAME = "metrics.tsv"
CHECKPOINT_FILENAME = "checkpoint.mmim"
CONFIG_FILENAME = "config.txt"
DEFAULT_OUT_DIR = "runs/default"

# Exit codes
EXIT_FAILURE = 1
EXIT_GRADCHECK_VIOLATION = 2
