from __future__ import annotations

import math
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator, model_validator

from constants import (
    BLOB_INTENSITY_RANGE,
    DEFAULT_BACKGROUND,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETAS,
    DEFAULT_CNN_WIDTH,
    DEFAULT_DECODER_WIDTH,
    DEFAULT_DEPTH,
    DEFAULT_EXPAND,
    DEFAULT_LR,
    DEFAULT_MASK_RATIO,
    DEFAULT_MAX_BLOBS,
    DEFAULT_MIN_BLOBS,
    DEFAULT_MODEL_DIM,
    DEFAULT_N_STAGES,
    DEFAULT_OUT_DIR,
    DEFAULT_STATE_DIM,
    DEFAULT_STEPS,
    DEFAULT_TOKI_INIT,
    DEFAULT_VOLUME_SHAPE,
    DEFAULT_WEIGHT_DECAY,
)
from masking.mask_pyramid import masked_voxel_count
from models.enums import MaskFill, MaskStrategy, ScanOrder, TokiVariant


def _parse_triple(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(int(part) for part in value.replace("x", ",").split(",") if part.strip())
    return value


class MaskConfig(BaseModel):
    ratio: float = Field(DEFAULT_MASK_RATIO, description="Masked fraction of the coarse grid")
    seed: int = Field(0, description="Base seed; step t draws its pyramid with seed + t")
    strategy: MaskStrategy = MaskStrategy.BOTTOM_UP

    @field_validator("ratio")
    @classmethod
    def _ratio_in_range(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"mask.ratio must lie in [0, 1), got {value}")
        return value


class ScanConfig(BaseModel):
    order: ScanOrder = ScanOrder.RASTER
    seed: int = Field(0, description="Permutation seed of the shuffle order")


class TokiConfig(BaseModel):
    variant: TokiVariant = TokiVariant.EQ8
    init: float = DEFAULT_TOKI_INIT

    @field_validator("init")
    @classmethod
    def _negative_init(cls, value: float) -> float:
        if value >= 0:
            raise ValueError(f"toki.init must be strictly negative, got {value}")
        return value


class DecoderConfig(BaseModel):
    mask_fill: MaskFill = MaskFill.TOKI
    width: int = Field(DEFAULT_DECODER_WIDTH, gt=0)
    skip: bool = True


class DataConfig(BaseModel):
    seed: int = Field(0, description="Base seed; step t draws its batch with seed + t")
    min_blobs: int = Field(DEFAULT_MIN_BLOBS, ge=0)
    max_blobs: int = Field(DEFAULT_MAX_BLOBS, ge=0)
    background: float = Field(DEFAULT_BACKGROUND, ge=0.0, le=1.0)
    augment: bool = False

    @model_validator(mode="after")
    def _blob_range(self) -> DataConfig:
        if self.min_blobs > self.max_blobs:
            raise ValueError(
                f"data.min_blobs ({self.min_blobs}) exceeds data.max_blobs ({self.max_blobs})"
            )
        return self


class AblationConfig(BaseModel):
    steps: int | None = Field(None, ge=0, description="Steps per setting, defaults to steps")


class SyntheticVolumeSpec(BaseModel):
    """
    Recipe of one synthetic volume: ellipsoid blobs with a Gaussian falloff
    over a constant background.
    """

    seed: int
    shape: tuple[int, int, int] = DEFAULT_VOLUME_SHAPE
    n_blobs: tuple[int, int] = (DEFAULT_MIN_BLOBS, DEFAULT_MAX_BLOBS)
    intensity: tuple[float, float] = BLOB_INTENSITY_RANGE
    background: float = DEFAULT_BACKGROUND

    @field_validator("shape", mode="before")
    @classmethod
    def _parse_shape(cls, value: Any) -> Any:
        return _parse_triple(value)

    @model_validator(mode="after")
    def _check_ranges(self) -> SyntheticVolumeSpec:
        low, high = self.n_blobs
        if low < 0 or low > high:
            raise ValueError(f"Invalid blob count range {self.n_blobs}")
        lo, hi = self.intensity
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"Blob intensities must lie within [0, 1], got {self.intensity}")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError(f"Background must lie within [0, 1], got {self.background}")
        return self


class RunConfig(BaseModel):
    """
    Effective configuration of a run: defaults, then a key=value file, then
    command-line overrides.
    """

    volume_shape: tuple[int, int, int] = DEFAULT_VOLUME_SHAPE
    n_stages: int = Field(DEFAULT_N_STAGES, ge=1)
    model_dim: int = Field(DEFAULT_MODEL_DIM, gt=0)
    depth: int = Field(DEFAULT_DEPTH, ge=0)
    state_dim: int = Field(DEFAULT_STATE_DIM, gt=0)
    expand: int = Field(DEFAULT_EXPAND, gt=0)
    cnn_width: int = Field(DEFAULT_CNN_WIDTH, gt=0)
    causal_conv: bool = True

    mask: MaskConfig = Field(default_factory=MaskConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)
    toki: TokiConfig = Field(default_factory=TokiConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)

    lr: float = Field(DEFAULT_LR, gt=0.0)
    weight_decay: float = Field(DEFAULT_WEIGHT_DECAY, ge=0.0)
    beta1: float = Field(DEFAULT_BETAS[0], ge=0.0, lt=1.0)
    beta2: float = Field(DEFAULT_BETAS[1], ge=0.0, lt=1.0)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, gt=0)
    steps: int = Field(DEFAULT_STEPS, ge=0)
    precision: int = 32
    seed: int = Field(0, description="Seed of parameter initialization")
    out_dir: Path = Path(DEFAULT_OUT_DIR)

    @field_validator("volume_shape", mode="before")
    @classmethod
    def _parse_volume_shape(cls, value: Any) -> Any:
        return _parse_triple(value)

    @field_validator("precision")
    @classmethod
    def _known_precision(cls, value: int) -> int:
        if value not in (32, 64):
            raise ValueError(f"precision must be 32 or 64, got {value}")
        return value

    @model_validator(mode="after")
    def _divisible_volume(self) -> RunConfig:
        factor = 2**self.n_stages
        if any(s <= 0 or s % factor for s in self.volume_shape):
            raise ValueError(
                f"volume_shape {self.volume_shape} must be divisible by 2**n_stages = {factor}"
            )
        return self

    @model_validator(mode="after")
    def _masks_some_coarse_voxel(self) -> RunConfig:
        coarse_size = math.prod(s // 2 ** (self.n_stages - 1) for s in self.volume_shape)
        if masked_voxel_count(self.mask.ratio, coarse_size) == 0:
            raise ValueError(
                f"mask.ratio {self.mask.ratio} masks none of the {coarse_size} coarse voxels; "
                "the masked reconstruction loss would be undefined"
            )
        return self

    @property
    def betas(self) -> tuple[float, float]:
        return (self.beta1, self.beta2)

    def volume_spec(self, seed: int) -> SyntheticVolumeSpec:
        return SyntheticVolumeSpec(
            seed=seed,
            shape=self.volume_shape,
            n_blobs=(self.data.min_blobs, self.data.max_blobs),
            background=self.data.background,
        )

    def with_overrides(self, overrides: dict[str, Any]) -> RunConfig:
        """
        Copy with dotted-key overrides applied and everything revalidated.
        """
        data = self.model_dump()
        for key, value in overrides.items():
            _assign(data, key, value)
        return RunConfig.model_validate(data)

    @classmethod
    def from_flat(cls, entries: dict[str, Any]) -> RunConfig:
        return cls().with_overrides(entries)

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
        entries = parse_config_lines(Path(path).read_text().splitlines(), source=str(path))
        entries.update(overrides or {})
        return cls.from_flat(entries)

    def to_flat(self) -> list[str]:
        lines = []
        for key, value in _flatten(self.model_dump(mode="json")):
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={value}")
        return lines


def normalize_key(key: str) -> str:
    return key.strip().replace("-", "_")


def parse_config_lines(lines: list[str], source: str = "<config>") -> dict[str, str]:
    """
    key=value lines; blank lines and # comments are skipped.
    """
    entries = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{number}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        entries[normalize_key(key)] = value.strip()
    return entries


def _assign(data: dict[str, Any], key: str, value: Any) -> None:
    parts = normalize_key(key).split(".")
    target = data
    for part in parts[:-1]:
        if not isinstance(target.get(part), dict):
            raise ValueError(f"Unknown config section {part!r} in {key!r}")
        target = target[part]
    if parts[-1] not in target:
        raise ValueError(f"Unknown config key {key!r}")
    target[parts[-1]] = value


def _flatten(data: dict[str, Any], prefix: str = ""):
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, f"{name}.")
        else:
            yield name, value
