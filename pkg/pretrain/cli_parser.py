import argparse
import sys
from typing import Optional

from constants import Commands

SHOW_HELP = False

# Intercept --help/-h flags before importing bittensor since it overrides help behavior
# This allows showing our custom help message instead of bittensor's default one
if "--help" in sys.argv:
    SHOW_HELP = True
    sys.argv.remove("--help")
elif "-h" in sys.argv:
    SHOW_HELP = True
    sys.argv.remove("-h")

# flake8: noqa
import bittensor as bt

from models.enums import AblationAxis
from models.run_config import RunConfig, normalize_key

parser: Optional[argparse.ArgumentParser] = None
config: Optional[argparse.Namespace] = None
run_config: Optional[RunConfig] = None

DESCRIPTION = (
    "Masked hybrid CNN-Mamba pre-training on synthetic 3D volumes. Any config "
    "key can be overridden with --key value, e.g. --mask.ratio 0.5."
)


def parse_overrides(extras: list[str]) -> dict[str, str]:
    """
    Turn leftover `--key value` / `--key=value` arguments into config entries.
    """
    overrides = {}
    i = 0
    while i < len(extras):
        arg = extras[i]
        if not arg.startswith("--"):
            raise ValueError(f"Unexpected argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        elif i + 1 < len(extras):
            value = extras[i + 1]
            i += 2
        else:
            raise ValueError(f"Missing value for {arg}")
        overrides[normalize_key(key)] = value
    return overrides


def init_config(argv: Optional[list[str]] = None) -> tuple[argparse.Namespace, RunConfig]:
    """
    Parse the command line into the global `config` namespace and the
    effective `run_config`.
    """
    from utils import wandb_logger

    global parser
    global config
    global run_config

    parser = argparse.ArgumentParser(description=DESCRIPTION, allow_abbrev=False)
    parser.add_argument(
        "command",
        nargs="?",
        choices=[Commands.PRETRAIN, Commands.RECONSTRUCT, Commands.GRADCHECK, Commands.ABLATE],
        help="Subcommand to run.",
    )
    parser.add_argument("--config", type=str, default=None, help="Path to a key=value config file.")
    parser.add_argument("--out", type=str, default=None, help="Output directory of the run.")
    parser.add_argument("--seed", type=int, default=None, help="Seed of parameter initialization.")
    parser.add_argument(
        "--checkpoint",
        type=str,
        default=None,
        help="Checkpoint to reconstruct from (default: <out>/checkpoint.mmim).",
    )
    parser.add_argument(
        "--axis",
        type=str,
        choices=[str(axis) for axis in AblationAxis],
        default=str(AblationAxis.MASK_RATIO),
        help="Ablation axis.",
    )
    parser.add_argument("--wandb-key", type=str, default="", help="A https://wandb.ai API key")
    parser.add_argument(
        "--disable-wandb",
        default=False,
        help="Whether to disable WandB logging.",
        action="store_true",
    )
    parser.add_argument(
        "--verbose", default=False, help="Enable debug logging.", action="store_true"
    )

    if SHOW_HELP:
        # --help or -h flag was passed, show the help message and exit
        parser.print_help()
        print("\nConfig keys:\n  " + "\n  ".join(RunConfig().to_flat()))
        sys.exit(0)

    config, extras = parser.parse_known_args(argv)
    if config.command is None:
        parser.error("a subcommand is required")

    if config.verbose:
        bt.logging.enable_debug()
    else:
        bt.logging.enable_info()

    overrides = parse_overrides(extras)
    if config.seed is not None:
        overrides["seed"] = config.seed
    if config.out is not None:
        overrides["out_dir"] = config.out
    if config.config:
        run_config = RunConfig.from_file(config.config, overrides)
    else:
        run_config = RunConfig.from_flat(overrides)
    bt.logging.debug(f"Effective config: {', '.join(run_config.to_flat())}")

    if config.wandb_key:
        wandb_logger.safe_login(api_key=config.wandb_key)
        bt.logging.success("Logged into WandB")
    return config, run_config
