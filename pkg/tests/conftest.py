import numpy as np
import pytest
import torch

from autodiff.precision import default_precision
from masking.mask_pyramid import pyramid_for_volume
from models.run_config import RunConfig


@pytest.fixture
def float64():
    with default_precision(64) as dtype:
        yield dtype


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(tmp_path) -> RunConfig:
    return RunConfig.from_flat(
        {
            "volume_shape": "8,8,8",
            "n_stages": 3,
            "model_dim": 8,
            "depth": 1,
            "state_dim": 4,
            "cnn_width": 4,
            "decoder.width": 4,
            "mask.ratio": 0.5,
            "batch_size": 2,
            "steps": 3,
            "lr": 1e-3,
            "out_dir": str(tmp_path / "run"),
        }
    )


@pytest.fixture
def tiny_model(tiny_config, float64):
    from training.pretrain_session import build_model

    return build_model(tiny_config.with_overrides({"precision": 64}))


@pytest.fixture
def tiny_volume(float64):
    generator = torch.Generator().manual_seed(0)
    return torch.rand(2, 1, 8, 8, 8, generator=generator, dtype=float64)


@pytest.fixture
def half_masked_pyramid():
    return pyramid_for_volume((8, 8, 8), 3, 0.5, seed=3)
