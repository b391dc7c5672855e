import sys
import traceback
from pathlib import Path
from typing import Optional

# isort: off
import cli_parser  # <- this need to stay before bittensor import

import bittensor as bt

# isort: on

from constants import (
    CHECKPOINT_FILENAME,
    EXIT_FAILURE,
    EXIT_GRADCHECK_VIOLATION,
    Commands,
)
from training.gradcheck import GradHook
from utils import wandb_logger


def run(argv: Optional[list[str]] = None, grad_hook: Optional[GradHook] = None) -> int:
    try:
        args, config = cli_parser.init_config(argv)
    except SystemExit as e:
        # argparse exits with 2, which is reserved for gradient violations
        return EXIT_FAILURE if e.code else 0
    except Exception:
        bt.logging.error(f"CRITICAL: Invalid configuration\n{traceback.format_exc()}")
        return EXIT_FAILURE

    wandb_logger.safe_init(
        name=f"{args.command}-{config.out_dir.name}",
        run_config=dict(line.split("=", 1) for line in config.to_flat()),
        disabled=args.disable_wandb or not args.wandb_key,
    )
    try:
        if args.command == Commands.PRETRAIN:
            from training.pretrain_session import cmd_pretrain

            cmd_pretrain(config)
        elif args.command == Commands.RECONSTRUCT:
            from training.reconstruct import cmd_reconstruct

            checkpoint = args.checkpoint or Path(config.out_dir) / CHECKPOINT_FILENAME
            cmd_reconstruct(checkpoint, config)
        elif args.command == Commands.GRADCHECK:
            from training.gradcheck import cmd_gradcheck

            report = cmd_gradcheck(config, grad_hook)
            if not report.passed:
                return EXIT_GRADCHECK_VIOLATION
        elif args.command == Commands.ABLATE:
            from training.ablation import cmd_ablate

            cmd_ablate(config, args.axis)
    except Exception:
        bt.logging.error(f"CRITICAL: {args.command} failed\n{traceback.format_exc()}")
        return EXIT_FAILURE
    finally:
        wandb_logger.safe_finish()
    return 0


if __name__ == "__main__":
    sys.exit(run())
