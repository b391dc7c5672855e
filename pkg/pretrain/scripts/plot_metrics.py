import argparse
import os
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from rich.console import Console

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from training.metrics_writer import read_metrics  # noqa: E402
from training.reconstruct import (  # noqa: E402
    INPUT_FILENAME,
    MASKED_INPUT_FILENAME,
    RECONSTRUCTION_FILENAME,
)
from training.volume_io import read_volume  # noqa: E402

console = Console()


def parse_args():
    parser = argparse.ArgumentParser(description="Plot pre-training runs")
    parser.add_argument(
        "runs", nargs="+", type=Path, help="Run directories holding metrics.tsv"
    )
    parser.add_argument("--output", type=Path, default=Path("loss_curves.png"))
    parser.add_argument(
        "--volumes",
        type=Path,
        default=None,
        help="Directory with reconstruct output to render as central slices",
    )
    return parser.parse_args()


def plot_loss_curves(runs: list[Path], output: Path) -> None:
    plt.rcParams["axes.grid"] = True
    plt.rcParams["grid.alpha"] = 0.2
    fig, (loss_ax, lr_ax) = plt.subplots(2, 1, figsize=(10, 8), sharex=True)
    for run in runs:
        metrics_path = run / "metrics.tsv"
        if not metrics_path.exists():
            console.print(f"[yellow]Skipping {run}: no metrics.tsv[/yellow]")
            continue
        records = read_metrics(metrics_path)
        if not records:
            continue
        steps, lrs, losses = zip(*records)
        loss_ax.plot(steps, losses, label=run.name)
        lr_ax.plot(steps, lrs, label=run.name)

    loss_ax.set_ylabel("masked MSE")
    loss_ax.set_yscale("log")
    loss_ax.legend()
    lr_ax.set_ylabel("learning rate")
    lr_ax.set_xlabel("step")
    plt.tight_layout(pad=2.0)
    plt.savefig(output, dpi=150, bbox_inches="tight", facecolor="white")
    plt.close(fig)
    console.print(f"[green]Saved {output}[/green]")


def plot_slices(volume_dir: Path, output: Path) -> None:
    names = [INPUT_FILENAME, MASKED_INPUT_FILENAME, RECONSTRUCTION_FILENAME]
    volumes = [read_volume(volume_dir / name) for name in names]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, name, volume in zip(axes, names, volumes):
        ax.imshow(volume[volume.shape[0] // 2], cmap="gray", vmin=0.0, vmax=1.0)
        ax.set_title(name.removesuffix(".mvol"))
        ax.axis("off")
    plt.tight_layout()
    plt.savefig(output, dpi=150, bbox_inches="tight", facecolor="white")
    plt.close(fig)
    console.print(f"[green]Saved {output}[/green]")


if __name__ == "__main__":
    args = parse_args()
    plot_loss_curves(args.runs, args.output)
    if args.volumes is not None:
        plot_slices(args.volumes, args.output.with_name(args.output.stem + "_slices.png"))
