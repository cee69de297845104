"""The full two-stage reconstruction model and its construction from a config."""

from __future__ import annotations

import torch
from torch import nn

from .config import RunConfig
from .consistency import ConsistencyNet
from .fusion import ExposureFusionNet


class ReconstructionModel(nn.Module):
    """Exposure fusion followed by sequence-level residual refinement.

    forward(backbone, anchor_low, anchor_high) -> (X, Z): the refined HDR
    sequence and the stage-1 intermediate it was built from.
    """

    def __init__(self, channels: int = 32, refine_channels: int = 48,
                 refine_blocks: int = 2, in_channels: int = 3):
        super().__init__()
        self.fusion = ExposureFusionNet(channels=channels, in_channels=in_channels)
        self.refiner = ConsistencyNet(channels=refine_channels, blocks=refine_blocks)

    def forward(self, backbone, anchor_low, anchor_high, force_closed_gates=False):
        z = self.fusion(backbone, anchor_low, anchor_high, force_closed_gates=force_closed_gates)
        x = self.refiner(z)
        return x, z


def build_model(config: RunConfig) -> ReconstructionModel:
    in_channels = 6 if config.model.six_channel_inputs else 3
    return ReconstructionModel(
        channels=config.model.c,
        refine_channels=config.model.c_prime,
        refine_blocks=config.model.k_blocks,
        in_channels=in_channels,
    )


def model_from_checkpoint(ckpt) -> ReconstructionModel:
    """Rebuild a model from a loaded checkpoint, in eval mode."""
    model = build_model(ckpt.config)
    model.load_state_dict(ckpt.model_state)
    model.eval()
    return model


def count_parameters(module: nn.Module) -> int:
    """Total number of learnable scalar parameters in a module tree."""
    return sum(p.numel() for p in module.parameters())


def radiance_view(x: torch.Tensor) -> torch.Tensor:
    """Clamp a raw model output into the radiance domain (>= 0).

    Stage 2 adds an unconstrained residual, so isolated pixels can dip below
    zero; losses and metrics are defined on non-negative radiance only.
    Differentiable (zero gradient where clamping is active).
    """
    return torch.clamp(x, min=0.0)
