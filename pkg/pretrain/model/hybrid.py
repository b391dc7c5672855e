from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from masking.mask_pyramid import MaskPyramid
from model.decoder import HybridDecoder
from model.encoder import HybridEncoder
from model.loss import masked_mse
from models.enums import ScanOrder
from models.run_config import RunConfig

# Checked in order; the first matching name fragment decides the group.
PARAMETER_GROUP_RULES = (
    ("encoder.stages.", "conv_stages"),
    ("encoder.patch_embed.", "patch_embed"),
    ("encoder.position_embedding", "position_embedding"),
    (".A_log", "mamba_A"),
    (".delta_proj.", "mamba_delta"),
    (".b_proj.", "mamba_B"),
    (".c_proj.", "mamba_C"),
    ("encoder.blocks.", "mamba_proj"),
    ("decoder.fill.log_decay", "toki"),
    ("decoder.fill.token", "mask_token"),
    ("decoder.fill_tokens.", "fill_tokens"),
    ("decoder.head.", "head"),
    ("decoder.", "decoder"),
)


def parameter_group(name: str) -> str:
    for fragment, group in PARAMETER_GROUP_RULES:
        if fragment in name:
            return group
    raise ValueError(f"Parameter {name} belongs to no group")


@dataclass
class ReconBatch:
    input: torch.Tensor
    pyramid: MaskPyramid
    prediction: torch.Tensor
    loss: torch.Tensor


class HybridMaskedAutoencoder(nn.Module):
    """
    Hybrid CNN-Mamba encoder and decoder trained to reconstruct masked voxels.
    """

    def __init__(
        self,
        encoder: HybridEncoder,
        decoder: HybridDecoder,
        scan_order: ScanOrder | str = ScanOrder.RASTER,
        scan_seed: int | None = None,
    ):
        super().__init__()
        self.encoder = encoder
        self.decoder = decoder
        self.scan_order = ScanOrder(scan_order)
        self.scan_seed = scan_seed

    @classmethod
    def from_config(cls, config: RunConfig) -> HybridMaskedAutoencoder:
        encoder = HybridEncoder(
            volume_shape=config.volume_shape,
            n_stages=config.n_stages,
            cnn_width=config.cnn_width,
            model_dim=config.model_dim,
            depth=config.depth,
            state_dim=config.state_dim,
            expand=config.expand,
            causal_conv=config.causal_conv,
        )
        decoder = HybridDecoder(
            stage_widths=encoder.widths,
            model_dim=config.model_dim,
            width=config.decoder.width,
            mask_fill=config.decoder.mask_fill,
            toki_init=config.toki.init,
            toki_variant=config.toki.variant,
            skip=config.decoder.skip,
        )
        return cls(encoder, decoder, config.scan.order, config.scan.seed)

    def forward(self, volume: torch.Tensor, pyramid: MaskPyramid) -> torch.Tensor:
        encoded = self.encoder.encode(volume, pyramid, self.scan_order, self.scan_seed)
        return self.decoder(encoded, pyramid)

    def reconstruct(self, volume: torch.Tensor, pyramid: MaskPyramid) -> ReconBatch:
        prediction = self(volume, pyramid)
        return ReconBatch(
            input=volume,
            pyramid=pyramid,
            prediction=prediction,
            loss=masked_mse(volume, prediction, pyramid),
        )

    def parameter_groups(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        groups: dict[str, list[tuple[str, nn.Parameter]]] = {}
        for name, param in self.named_parameters():
            groups.setdefault(parameter_group(name), []).append((name, param))
        return groups
