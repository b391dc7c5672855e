from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import bittensor as bt

from utils import wandb_logger

METRICS_HEADER = ("step", "lr", "loss")


@dataclass
class MetricsWriter:
    """
    Append-only TSV of per-step training metrics, flushed after every record.
    """

    path: Path
    _handle: TextIO | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.path = Path(self.path)

    def open(self) -> MetricsWriter:
        try:
            self._handle = open(self.path, "w", encoding="utf-8")
            self._handle.write("\t".join(METRICS_HEADER) + "\n")
            self._handle.flush()
        except OSError as e:
            bt.logging.error(f"Failed to open metrics file {self.path}: {e}")
            raise RuntimeError(f"Failed to open metrics file {self.path}: {e}") from e
        return self

    def write(self, step: int, lr: float, loss: float) -> None:
        if self._handle is None:
            raise RuntimeError(f"Metrics file {self.path} is not open")
        try:
            self._handle.write(f"{step}\t{lr!r}\t{loss!r}\n")
            self._handle.flush()
        except OSError as e:
            raise RuntimeError(f"Failed to append to metrics file {self.path}: {e}") from e
        wandb_logger.safe_log({"step": step, "lr": lr, "loss": loss})

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self):
        return self.open()

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return None


def read_metrics(path: str | Path) -> list[tuple[int, float, float]]:
    """
    Parse a metrics TSV into (step, lr, loss) records.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != METRICS_HEADER:
        raise ValueError(f"{path}: missing metrics header")
    records = []
    for line in lines[1:]:
        step, lr, loss = line.split("\t")
        records.append((int(step), float(lr), float(loss)))
    return records
