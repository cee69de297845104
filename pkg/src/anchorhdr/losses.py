"""Training objectives, all expressed in the tone-mapped domain.

Sequences may be (T, 3, H, W) or (B, T, 3, H, W); the temporal axis is the
one before the channel axis. Every norm is a mean over all elements so loss
magnitudes are independent of resolution and batch size.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .imaging import ToneMapParams, tone_map


@dataclass(frozen=True)
class LossWeights:
    lambda_t: float = 0.5
    lambda_z: float = 0.1

    def __post_init__(self):
        if self.lambda_t < 0 or self.lambda_z < 0:
            raise ValueError("loss weights must be non-negative")


def _check_pair(a: torch.Tensor, b: torch.Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{name}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.ndim not in (4, 5):
        raise ValueError(f"{name}: expected (T, C, H, W) or (B, T, C, H, W), got {tuple(a.shape)}")


def _time_dim(a: torch.Tensor) -> int:
    return 0 if a.ndim == 4 else 1


def spatial_fidelity_loss(pred: torch.Tensor, target: torch.Tensor,
                          tone: ToneMapParams = ToneMapParams()) -> torch.Tensor:
    """Mean absolute tone-mapped error, averaged over frames and pixels."""
    _check_pair(pred, target, "spatial_fidelity_loss")
    return torch.mean(torch.abs(tone_map(pred, tone) - tone_map(target, tone)))


def temporal_gradient_loss(pred: torch.Tensor, target: torch.Tensor,
                           tone: ToneMapParams = ToneMapParams()) -> torch.Tensor:
    """Mean absolute deviation between predicted and true inter-frame gradients.

    Penalizes flicker while leaving true scene motion alone: any offset that
    is constant across a sequence cancels in the frame differences.
    """
    _check_pair(pred, target, "temporal_gradient_loss")
    dim = _time_dim(pred)
    if pred.shape[dim] < 2:
        raise ValueError("temporal_gradient_loss needs at least two frames")
    dp = tone_map(pred, tone).diff(dim=dim)
    dt = tone_map(target, tone).diff(dim=dim)
    return torch.mean(torch.abs(dp - dt))


def anchor_consistency_loss(za: torch.Tensor, zb: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between two intermediate sequences.

    Used on stage-1 outputs built from the same backbone but different anchor
    pairs, forcing the fusion to respect the backbone's structure rather than
    hallucinate from the anchors.
    """
    _check_pair(za, zb, "anchor_consistency_loss")
    return torch.mean(torch.abs(za - zb))


def total_loss(l_spatial, l_temporal, l_anchor, weights: LossWeights = LossWeights()):
    """Weighted sum: L = L_s + lambda_t * L_t + lambda_z * L_Z."""
    return l_spatial + weights.lambda_t * l_temporal + weights.lambda_z * l_anchor
