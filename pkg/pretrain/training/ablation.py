from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import bittensor as bt
from tqdm import tqdm

from constants import (
    ABLATION_FILLS,
    ABLATION_MASK_RATIOS,
    ABLATION_MASKINGS,
    ABLATION_SCAN_ORDERS,
    ABLATION_SKIP,
)
from models.enums import AblationAxis
from models.run_config import RunConfig
from training.pretrain_session import cmd_pretrain
from utils import wandb_logger
from utils.logging import create_and_print_table
from utils.system import prepare_out_dir

# axis -> (config key, settings)
ABLATION_SETTINGS = {
    AblationAxis.MASK_RATIO: ("mask.ratio", ABLATION_MASK_RATIOS),
    AblationAxis.SCAN_ORDER: ("scan.order", ABLATION_SCAN_ORDERS),
    AblationAxis.FILL: ("decoder.mask_fill", ABLATION_FILLS),
    AblationAxis.SKIP: ("decoder.skip", ABLATION_SKIP),
    AblationAxis.MASKING: ("mask.strategy", ABLATION_MASKINGS),
}


@dataclass
class AblationRow:
    setting: str
    first_loss: float
    final_loss: float
    out_dir: Path


def _format_setting(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def cmd_ablate(config: RunConfig, axis: AblationAxis | str) -> list[AblationRow]:
    """
    Pre-train once per setting of `axis`, everything else (seeds included)
    shared, and tabulate the final masked MSE of each run.
    """
    axis = AblationAxis(axis)
    key, settings = ABLATION_SETTINGS[axis]
    root = prepare_out_dir(Path(config.out_dir) / f"ablate_{axis}")
    steps = config.ablation.steps if config.ablation.steps is not None else config.steps

    rows = []
    for value in tqdm(settings, desc=f"Ablating {axis}"):
        setting = _format_setting(value)
        run_config = config.with_overrides(
            {key: value, "steps": steps, "out_dir": root / setting}
        )
        bt.logging.info(f"Ablation {axis}={setting}")
        result = cmd_pretrain(run_config, show_progress=False)
        rows.append(
            AblationRow(
                setting=setting,
                first_loss=result.losses[0] if result.losses else float("nan"),
                final_loss=result.final_loss,
                out_dir=result.out_dir,
            )
        )
        wandb_logger.safe_log({f"ablation/{axis}/{setting}": result.final_loss})

    summary_path = root / "summary.tsv"
    try:
        with open(summary_path, "w", encoding="utf-8") as f:
            f.write(f"{axis}\tfirst_loss\tfinal_loss\n")
            for row in rows:
                f.write(f"{row.setting}\t{row.first_loss!r}\t{row.final_loss!r}\n")
    except OSError as e:
        bt.logging.error(f"Failed to write ablation summary {summary_path}: {e}")
        raise RuntimeError(f"Failed to write ablation summary {summary_path}: {e}") from e

    create_and_print_table(
        f"Ablation over {axis} ({steps} steps per setting)",
        [
            (str(axis), "left", "cyan"),
            ("First loss", "right", "white"),
            ("Final masked MSE", "right", "yellow"),
        ],
        [[row.setting, f"{row.first_loss:.6f}", f"{row.final_loss:.6f}"] for row in rows],
    )
    return rows
