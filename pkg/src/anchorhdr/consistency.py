"""Stage 2: sequence-level refinement X = Z + delta.

The intermediate sequence from stage 1 is downsampled by a strided encoder,
enriched by a two-pass bidirectional recurrence, mixed along the temporal
axis by stacked RWKV blocks (linear cost in sequence length), and decoded
back to full resolution as a dense residual. The final decoder layer is
zero-initialized so a freshly built network is the identity: X == Z.

The temporal mixer treats every spatial site as an independent sequence of
T channel vectors; parameters are shared across sites.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

LEAKY_SLOPE = 0.1


def _lrelu(x):
    return F.leaky_relu(x, LEAKY_SLOPE)


# ---------------------------------------------------------------------------
# Encoder / decoder
# ---------------------------------------------------------------------------

class SequenceEncoder(nn.Module):
    """Two stride-2 convolutions: (B, T, 3, H, W) -> (B, T, C, H/4, W/4)."""

    def __init__(self, channels: int, in_channels: int = 3):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, channels, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, stride=2, padding=1)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        b, t, c, h, w = z.shape
        if h % 4 != 0 or w % 4 != 0:
            raise ValueError(f"encoder requires spatial dims divisible by 4, got ({h}, {w})")
        f = self.conv2(_lrelu(self.conv1(z.reshape(b * t, c, h, w))))
        return f.reshape(b, t, -1, h // 4, w // 4)


class ResidualDecoder(nn.Module):
    """Two nearest-upsample + conv stages producing the full-resolution residual.

    The last convolution starts at exactly zero (weights and bias), so the
    decoded residual, and therefore the whole stage-2 update, vanishes at
    initialization.
    """

    def __init__(self, channels: int, out_channels: int = 3):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, out_channels, 3, padding=1)
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        b, t, c, h, w = f.shape
        x = f.reshape(b * t, c, h, w)
        x = _lrelu(self.conv1(F.interpolate(x, scale_factor=2, mode="nearest")))
        x = self.conv2(F.interpolate(x, scale_factor=2, mode="nearest"))
        return x.reshape(b, t, -1, 4 * h, 4 * w)


# ---------------------------------------------------------------------------
# Bidirectional propagation
# ---------------------------------------------------------------------------

class _ResidualCell(nn.Module):
    """Recurrent cell: channel reduction followed by a residual refinement."""

    def __init__(self, in_channels: int, channels: int):
        super().__init__()
        self.reduce = nn.Conv2d(in_channels, channels, 3, padding=1)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.reduce(x)
        return h + self.conv2(_lrelu(self.conv1(_lrelu(h))))


class BidirectionalAggregator(nn.Module):
    """Two forward/backward recurrent passes with cross-directional inputs.

    Pass 1 sees the encoded frame alone; pass 2 additionally sees the
    opposite direction's pass-1 state, so information crosses directions.
    Cells are shared across time steps; boundary states are zero. The output
    concatenates the encoding with all four propagated streams, giving
    exactly five times the encoder width.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.fwd1 = _ResidualCell(2 * channels, channels)
        self.bwd1 = _ResidualCell(2 * channels, channels)
        self.fwd2 = _ResidualCell(3 * channels, channels)
        self.bwd2 = _ResidualCell(3 * channels, channels)

    @staticmethod
    def _scan(cell, inputs, reverse: bool):
        t = len(inputs)
        order = range(t - 1, -1, -1) if reverse else range(t)
        first = inputs[0]
        state = first.new_zeros(first.shape[0], cell.reduce.out_channels, *first.shape[2:])
        out = [None] * t
        for i in order:
            state = cell(torch.cat((state, inputs[i]), dim=1))
            out[i] = state
        return out

    def forward(self, f0: torch.Tensor) -> torch.Tensor:
        if f0.ndim != 5:
            raise ValueError(f"expected (B, T, C, H, W), got {tuple(f0.shape)}")
        t = f0.shape[1]
        if t < 1:
            raise ValueError("bidirectional aggregation needs at least one frame")
        frames = [f0[:, i] for i in range(t)]
        fwd1 = self._scan(self.fwd1, frames, reverse=False)
        bwd1 = self._scan(self.bwd1, frames, reverse=True)
        fwd2 = self._scan(self.fwd2, [torch.cat((bk, fr), dim=1) for bk, fr in zip(bwd1, frames)],
                          reverse=False)
        bwd2 = self._scan(self.bwd2, [torch.cat((fw, fr), dim=1) for fw, fr in zip(fwd1, frames)],
                          reverse=True)
        stacked = [
            torch.cat((frames[i], fwd1[i], bwd1[i], fwd2[i], bwd2[i]), dim=1) for i in range(t)
        ]
        return torch.stack(stacked, dim=1)


# ---------------------------------------------------------------------------
# RWKV temporal mixing
# ---------------------------------------------------------------------------

def wkv_recurrence(decay: torch.Tensor, bonus: torch.Tensor, k: torch.Tensor,
                   v: torch.Tensor) -> torch.Tensor:
    """Linear-time weighted key-value aggregation.

    For every channel c and step t:

        wkv_t = (sum_{i<t} exp(-(t-1-i)*w_c + k_i) * v_i + exp(u_c + k_t) * v_t)
                / (sum_{i<t} exp(-(t-1-i)*w_c + k_i)     + exp(u_c + k_t))

    computed by an O(T) recurrence that tracks a running maximum exponent, so
    it neither overflows nor underflows for large |w|, |u| or long sequences.
    Because all weights are positive and normalized, each wkv_t is a convex
    combination of v_1..v_t.

    Args: decay ``w`` and bonus ``u`` of shape (C,); k, v of shape (N, T, C).
    Returns (N, T, C).
    """
    n, t, c = k.shape
    neg_inf = torch.finfo(k.dtype).min
    num = torch.zeros(n, c, dtype=k.dtype, device=k.device)
    den = torch.zeros(n, c, dtype=k.dtype, device=k.device)
    peak = torch.full((n, c), neg_inf, dtype=k.dtype, device=k.device)
    out = []
    for i in range(t):
        ki, vi = k[:, i], v[:, i]
        cur = bonus + ki  # instantaneous exponent for the current token
        top = torch.maximum(peak, cur)
        scale_prev = torch.exp(peak - top)
        scale_cur = torch.exp(cur - top)
        out.append((scale_prev * num + scale_cur * vi) / (scale_prev * den + scale_cur))
        shifted = peak - decay  # history ages by one decay step
        top = torch.maximum(shifted, ki)
        scale_prev = torch.exp(shifted - top)
        scale_cur = torch.exp(ki - top)
        num = scale_prev * num + scale_cur * vi
        den = scale_prev * den + scale_cur
        peak = top
    return torch.stack(out, dim=1)


class TimeMix(nn.Module):
    """RWKV time-mixing sub-layer over (N, T, C) sequences."""

    def __init__(self, channels: int):
        super().__init__()
        ramp = torch.arange(channels, dtype=torch.float32) / max(channels, 1)
        self.decay = nn.Parameter(torch.linspace(0.5, 2.0, channels))
        self.bonus = nn.Parameter(torch.zeros(channels))
        self.mix_k = nn.Parameter(ramp.clone())
        self.mix_v = nn.Parameter(ramp.clone())
        self.mix_r = nn.Parameter(ramp.clone())
        self.key = nn.Linear(channels, channels, bias=False)
        self.value = nn.Linear(channels, channels, bias=False)
        self.receptance = nn.Linear(channels, channels, bias=False)
        self.output = nn.Linear(channels, channels, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        prev = F.pad(x, (0, 0, 1, -1))  # token shift: x_{t-1}, zero at t=1
        k = self.key(torch.lerp(prev, x, self.mix_k))
        v = self.value(torch.lerp(prev, x, self.mix_v))
        r = self.receptance(torch.lerp(prev, x, self.mix_r))
        wkv = wkv_recurrence(self.decay, self.bonus, k, v)
        return self.output(torch.sigmoid(r) * wkv)


class ChannelMix(nn.Module):
    """RWKV channel-mixing sub-layer: gated squared-ReLU feed-forward."""

    def __init__(self, channels: int, hidden_mult: int = 4):
        super().__init__()
        ramp = torch.arange(channels, dtype=torch.float32) / max(channels, 1)
        self.mix_k = nn.Parameter(ramp.clone())
        self.mix_r = nn.Parameter(ramp.clone())
        self.key = nn.Linear(channels, hidden_mult * channels, bias=False)
        self.value = nn.Linear(hidden_mult * channels, channels, bias=False)
        self.receptance = nn.Linear(channels, channels, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        prev = F.pad(x, (0, 0, 1, -1))
        k = self.key(torch.lerp(prev, x, self.mix_k))
        kv = self.value(torch.relu(k) ** 2)
        return torch.sigmoid(self.receptance(torch.lerp(prev, x, self.mix_r))) * kv


class RwkvBlock(nn.Module):
    """Pre-norm residual block: time mixing then channel mixing."""

    def __init__(self, channels: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(channels)
        self.norm2 = nn.LayerNorm(channels)
        self.time_mix = TimeMix(channels)
        self.channel_mix = ChannelMix(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.time_mix(self.norm1(x))
        return x + self.channel_mix(self.norm2(x))


class TemporalMixer(nn.Module):
    """Project aggregated features and run K RWKV blocks along the time axis.

    Input (B, T, in_channels, H, W); every spatial site is mixed as its own
    length-T sequence with shared parameters. K = 0 reduces to the input
    projection alone.
    """

    def __init__(self, in_channels: int, channels: int, blocks: int):
        super().__init__()
        self.proj = nn.Conv2d(in_channels, channels, 1)
        self.blocks = nn.ModuleList(RwkvBlock(channels) for _ in range(blocks))

    def forward(self, fa: torch.Tensor) -> torch.Tensor:
        b, t, c, h, w = fa.shape
        x = self.proj(fa.reshape(b * t, c, h, w)).reshape(b, t, -1, h, w)
        if not self.blocks:
            return x
        cc = x.shape[2]
        # (B, T, C, H, W) -> (B*H*W, T, C): independent sequence per site.
        seq = x.permute(0, 3, 4, 1, 2).reshape(b * h * w, t, cc)
        for block in self.blocks:
            seq = block(seq)
        return seq.reshape(b, h, w, t, cc).permute(0, 3, 4, 1, 2).contiguous()


# ---------------------------------------------------------------------------
# Full stage 2
# ---------------------------------------------------------------------------

class ConsistencyNet(nn.Module):
    """Residual sequence solver: X = Z + decode(mix(aggregate(encode(Z))))."""

    def __init__(self, channels: int = 48, blocks: int = 2, in_channels: int = 3):
        super().__init__()
        self.encoder = SequenceEncoder(channels, in_channels)
        self.aggregator = BidirectionalAggregator(channels)
        self.mixer = TemporalMixer(5 * channels, channels, blocks)
        self.decoder = ResidualDecoder(channels, in_channels)

    def residual(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.mixer(self.aggregator(self.encoder(z))))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        squeeze = z.ndim == 4
        if squeeze:
            z = z[None]
        x = z + self.residual(z)
        return x[0] if squeeze else x
