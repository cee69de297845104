"""Stage 1: alignment-free exposure fusion in the low-frequency wavelet band.

A medium-exposure backbone sequence carries temporal structure; one low and
one high exposure frame act as dynamic-range anchors for the whole window.
Instead of warping the anchors onto each frame, the network estimates
per-pixel, per-channel reliability gates from bidirectional temporal context
and softly injects gated anchor features into the backbone. Fusion happens
in the half-resolution LL subband; each frame is reconstructed by inverting
the wavelet transform with the backbone's own high-frequency bands, so
unaligned anchor detail can never reintroduce ghosting.

Shapes: backbone sequences are (B, T, C, H, W), anchors (B, C, H, W); a
leading batch axis is added when the caller passes unbatched inputs.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .wavelet import SubbandSet, dwt_haar, idwt_haar

LEAKY_SLOPE = 0.1


def _lrelu(x):
    return F.leaky_relu(x, LEAKY_SLOPE)


class FeatureExtractor(nn.Module):
    """Shallow projection to a C-channel feature space followed by Haar analysis.

    The LL band is the fusion domain; the three detail bands are kept for the
    inverse transform.
    """

    def __init__(self, in_channels: int, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, y: torch.Tensor) -> SubbandSet:
        h, w = y.shape[-2], y.shape[-1]
        if h % 2 != 0 or w % 2 != 0:
            raise ValueError(f"feature extraction requires even spatial dims, got ({h}, {w})")
        feat = self.conv2(_lrelu(self.conv1(y)))
        return dwt_haar(feat)


def _conv_cell(in_channels: int, channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, channels, 3, padding=1),
        nn.LeakyReLU(LEAKY_SLOPE),
        nn.Conv2d(channels, channels, 3, padding=1),
        nn.LeakyReLU(LEAKY_SLOPE),
    )


class ReliabilityEstimator(nn.Module):
    """Motion-aware soft gates from bidirectional temporal context.

    Runs one forward and one backward recurrence over the backbone's LL
    features, each step seeing (previous state, anchor feature, current
    backbone feature); both boundary states are zero. The per-frame forward
    and backward states are concatenated, projected back to C channels and
    squashed through a sigmoid, so every gate value lies strictly in (0, 1).
    """

    def __init__(self, channels: int):
        super().__init__()
        self.forward_cell = _conv_cell(3 * channels, channels)
        self.backward_cell = _conv_cell(3 * channels, channels)
        self.head = nn.Conv2d(2 * channels, channels, 3, padding=1)

    def forward(self, anchor_ll: torch.Tensor, backbone_ll: torch.Tensor) -> torch.Tensor:
        if backbone_ll.ndim != 5:
            raise ValueError(f"backbone_ll must be (B, T, C, H, W), got {tuple(backbone_ll.shape)}")
        b, t, c, h, w = backbone_ll.shape
        if t < 1:
            raise ValueError("reliability estimation needs at least one backbone frame")
        if anchor_ll.shape != (b, c, h, w):
            raise ValueError(
                f"anchor_ll shape {tuple(anchor_ll.shape)} does not match backbone {tuple(backbone_ll.shape)}"
            )
        state = backbone_ll.new_zeros(b, c, h, w)
        fwd = []
        for i in range(t):
            state = self.forward_cell(torch.cat((state, anchor_ll, backbone_ll[:, i]), dim=1))
            fwd.append(state)
        state = backbone_ll.new_zeros(b, c, h, w)
        bwd = [None] * t
        for i in reversed(range(t)):
            state = self.backward_cell(torch.cat((state, anchor_ll, backbone_ll[:, i]), dim=1))
            bwd[i] = state
        gates = [torch.sigmoid(self.head(torch.cat((f, bk), dim=1))) for f, bk in zip(fwd, bwd)]
        return torch.stack(gates, dim=1)


class GatedAnchorFusion(nn.Module):
    """Residual injection of gated anchor features into a backbone frame.

    out = backbone + mix(alpha_low * proj(anchor_low), alpha_high * proj(anchor_high))

    All convolutions in the injection branch are bias-free, so the branch is
    exactly zero whenever both gated inputs are zero and the backbone passes
    through unchanged when the gates are closed.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.proj_low = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.proj_high = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.mix1 = nn.Conv2d(2 * channels, channels, 3, padding=1, bias=False)
        self.mix2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)

    def forward(self, backbone, anchor_low, anchor_high, alpha_low, alpha_high):
        shapes = {tuple(x.shape) for x in (backbone, anchor_low, anchor_high, alpha_low, alpha_high)}
        if len(shapes) != 1:
            raise ValueError(f"all fusion inputs must share one shape, got {sorted(shapes)}")
        gated_low = alpha_low * self.proj_low(anchor_low)
        gated_high = alpha_high * self.proj_high(anchor_high)
        injection = self.mix2(_lrelu(self.mix1(torch.cat((gated_low, gated_high), dim=1))))
        return backbone + injection


class RadianceDecoder(nn.Module):
    """Lightweight head mapping fused features to non-negative radiance."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, 3, 3, padding=1)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        return F.softplus(self.conv2(_lrelu(self.conv1(feat))))


class ExposureFusionNet(nn.Module):
    """Stage 1 end to end: LDR window plus anchor pair -> intermediate sequence Z.

    Per frame: extract subband features for the backbone frame and both
    anchors, estimate gates from temporal context, blend gated anchor LL
    features into the backbone LL, invert the wavelet transform with the
    backbone's detail bands, and decode to radiance. Output matches the
    backbone's temporal length and spatial size.
    """

    def __init__(self, channels: int = 32, in_channels: int = 3):
        super().__init__()
        self.channels = channels
        self.in_channels = in_channels
        self.extractor = FeatureExtractor(in_channels, channels)
        self.reliability = ReliabilityEstimator(channels)
        self.fuse = GatedAnchorFusion(channels)
        self.decoder = RadianceDecoder(channels)

    def forward(
        self,
        backbone: torch.Tensor,
        anchor_low: torch.Tensor,
        anchor_high: torch.Tensor,
        force_closed_gates: bool = False,
    ) -> torch.Tensor:
        squeeze = backbone.ndim == 4
        if squeeze:
            backbone = backbone[None]
            anchor_low = anchor_low[None]
            anchor_high = anchor_high[None]
        if backbone.ndim != 5:
            raise ValueError(f"backbone must be (B, T, C, H, W), got {tuple(backbone.shape)}")
        b, t, _, h, w = backbone.shape

        bands = self.extractor(backbone.reshape(b * t, -1, h, w))
        ll = bands.ll.reshape(b, t, self.channels, h // 2, w // 2)
        low_ll = self.extractor(anchor_low).ll
        high_ll = self.extractor(anchor_high).ll

        if force_closed_gates:
            alpha_low = torch.zeros_like(ll)
            alpha_high = torch.zeros_like(ll)
        else:
            alpha_low = self.reliability(low_ll, ll)
            alpha_high = self.reliability(high_ll, ll)

        # Fold time into the batch axis; the anchors are shared across frames.
        rep_low = low_ll[:, None].expand(-1, t, -1, -1, -1).reshape(b * t, *low_ll.shape[1:])
        rep_high = high_ll[:, None].expand(-1, t, -1, -1, -1).reshape(b * t, *high_ll.shape[1:])
        fused_ll = self.fuse(
            ll.reshape(b * t, *ll.shape[2:]),
            rep_low,
            rep_high,
            alpha_low.reshape(b * t, *alpha_low.shape[2:]),
            alpha_high.reshape(b * t, *alpha_high.shape[2:]),
        )
        full = idwt_haar(SubbandSet(ll=fused_ll, lh=bands.lh, hl=bands.hl, hh=bands.hh))
        z = self.decoder(full).reshape(b, t, 3, h, w)
        return z[0] if squeeze else z
