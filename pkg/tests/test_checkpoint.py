import struct

import pytest
import torch

from constants import CHECKPOINT_MAGIC
from model import CheckpointError, load_checkpoint, read_checkpoint, save_checkpoint
from training.pretrain_session import build_model


class TestCheckpoint:
    def test_round_trip_restores_parameters(self, tiny_config, tiny_model, tmp_path):
        path = tmp_path / "model.mmim"
        save_checkpoint(path, tiny_model)
        other = build_model(tiny_config.with_overrides({"precision": 64, "seed": 99}))
        load_checkpoint(path, other)
        for (name, a), (_, b) in zip(tiny_model.named_parameters(), other.named_parameters()):
            assert torch.equal(a, b), name

    def test_names_keep_model_order(self, tiny_model, tmp_path):
        path = tmp_path / "model.mmim"
        save_checkpoint(path, tiny_model)
        state = read_checkpoint(path)
        assert list(state) == [name for name, _ in tiny_model.named_parameters()]
        assert all(t.dtype == torch.float64 for t in state.values())

    def test_float32_values(self, tiny_config, tmp_path):
        model = build_model(tiny_config)
        path = tmp_path / "model.mmim"
        save_checkpoint(path, model)
        data = path.read_bytes()
        assert data[:4] == CHECKPOINT_MAGIC
        version, count = struct.unpack("<II", data[4:12])
        assert version == 1
        assert count == len(list(model.parameters()))
        assert all(t.dtype == torch.float32 for t in read_checkpoint(path).values())

    def test_bad_magic(self, tiny_model, tmp_path):
        path = tmp_path / "model.mmim"
        save_checkpoint(path, tiny_model)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_truncated(self, tiny_model, tmp_path):
        path = tmp_path / "model.mmim"
        save_checkpoint(path, tiny_model)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_trailing_bytes(self, tiny_model, tmp_path):
        path = tmp_path / "model.mmim"
        save_checkpoint(path, tiny_model)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_architecture_mismatch(self, tiny_config, tiny_model, tmp_path):
        path = tmp_path / "model.mmim"
        save_checkpoint(path, tiny_model)
        wider = build_model(tiny_config.with_overrides({"precision": 64, "model_dim": 12}))
        with pytest.raises(CheckpointError):
            load_checkpoint(path, wider)
        learnable = build_model(
            tiny_config.with_overrides({"precision": 64, "decoder.mask_fill": "learnable"})
        )
        with pytest.raises(CheckpointError):
            load_checkpoint(path, learnable)

    def test_missing_file(self, tmp_path):
        with pytest.raises(RuntimeError):
            read_checkpoint(tmp_path / "absent.mmim")
