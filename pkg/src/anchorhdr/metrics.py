"""Evaluation metrics: tone-mapped fidelity plus temporal-stability statistics.

Fidelity (PSNR/SSIM) is computed in the tone-mapped domain, the convention
for HDR evaluation. Temporal stability is measured three ways:

* t-PSNR / t-SSIM on inter-frame difference maps,
* brightness statistics (AB, MADB, LSD) on per-frame mean luminance,
* the spread (population standard deviation) of per-frame PSNR.

The brightness statistics and the PSNR spread are each implemented behind a
single function so their definitions can be swapped in one place; the exact
formulas below are reconstructions of commonly reported quantities:

    B_t  = mean over pixels of 255 * luma(tonemapped frame t)   (BT.601 luma)
    AB   = mean_t |B^pred_t - B^ref_t|                          (reference-based)
    MADB = mean_t |B^pred_{t+1} - B^pred_t|                     (no-reference)
    LSD  = population std of {B^pred_t}                         (no-reference)

All functions are pure and compute internally at float64. Everything accepts
torch tensors of shape (T, 3, H, W) for sequences or (3, H, W) / (H, W) for
single frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .imaging import ToneMapParams, tone_map

PSNR_CAP_DB = 99.0
_LUMA = (0.299, 0.587, 0.114)  # ITU-R BT.601

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


def _as_f64(x: torch.Tensor) -> torch.Tensor:
    return x.detach().to(torch.float64)


def _check_shapes(a: torch.Tensor, b: torch.Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{name}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def _psnr_raw(a: torch.Tensor, b: torch.Tensor, data_range: float) -> float:
    mse = float(torch.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(data_range ** 2 / mse), PSNR_CAP_DB)


def psnr_mu(pred: torch.Tensor, target: torch.Tensor,
            tone: ToneMapParams = ToneMapParams()) -> float:
    """PSNR between tone-mapped images, data range 1. Identical inputs cap at 99 dB."""
    _check_shapes(pred, target, "psnr_mu")
    return _psnr_raw(tone_map(_as_f64(pred), tone), tone_map(_as_f64(target), tone), 1.0)


def _gaussian_window(dtype, device) -> torch.Tensor:
    half = _SSIM_WINDOW // 2
    coords = torch.arange(-half, half + 1, dtype=dtype, device=device)
    g = torch.exp(-(coords ** 2) / (2 * _SSIM_SIGMA ** 2))
    g = g / g.sum()
    return torch.outer(g, g)


def _ssim_raw(a: torch.Tensor, b: torch.Tensor) -> float:
    """Single-scale SSIM on images already in [0, 1]-range space, averaged over channels."""
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.shape[-2] < _SSIM_WINDOW or a.shape[-1] < _SSIM_WINDOW:
        raise ValueError(
            f"ssim needs frames of at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, got {tuple(a.shape[-2:])}"
        )
    win = _gaussian_window(a.dtype, a.device)[None, None]
    x = a[:, None]  # channels as batch
    y = b[:, None]
    mu_x = F.conv2d(x, win)
    mu_y = F.conv2d(y, win)
    xx = F.conv2d(x * x, win) - mu_x ** 2
    yy = F.conv2d(y * y, win) - mu_y ** 2
    xy = F.conv2d(x * y, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * xy + _SSIM_C2)
    den = (mu_x ** 2 + mu_y ** 2 + _SSIM_C1) * (xx + yy + _SSIM_C2)
    return float(torch.mean(num / den))


def ssim_mu(pred: torch.Tensor, target: torch.Tensor,
            tone: ToneMapParams = ToneMapParams()) -> float:
    """Single-scale SSIM between tone-mapped images (11x11 Gaussian, sigma 1.5)."""
    _check_shapes(pred, target, "ssim_mu")
    return _ssim_raw(tone_map(_as_f64(pred), tone), tone_map(_as_f64(target), tone))


def _require_sequence(x: torch.Tensor, name: str, min_frames: int = 2) -> None:
    if x.ndim != 4:
        raise ValueError(f"{name}: expected a (T, C, H, W) sequence, got {tuple(x.shape)}")
    if x.shape[0] < min_frames:
        raise ValueError(f"{name}: needs at least {min_frames} frames, got {x.shape[0]}")


def temporal_stability(pred: torch.Tensor, target: torch.Tensor,
                       tone: ToneMapParams = ToneMapParams()) -> tuple[float, float]:
    """(t-PSNR, t-SSIM): fidelity of tone-mapped inter-frame difference maps.

    Differences live in [-1, 1], so PSNR uses data range 2 and SSIM is taken
    on the differences remapped to [0, 1].
    """
    _check_shapes(pred, target, "temporal_stability")
    _require_sequence(pred, "temporal_stability")
    dp = tone_map(_as_f64(pred), tone).diff(dim=0)
    dt = tone_map(_as_f64(target), tone).diff(dim=0)
    psnrs = [_psnr_raw(dp[i], dt[i], 2.0) for i in range(dp.shape[0])]
    ssims = [_ssim_raw((dp[i] + 1) / 2, (dt[i] + 1) / 2) for i in range(dp.shape[0])]
    return float(sum(psnrs) / len(psnrs)), float(sum(ssims) / len(ssims))


def brightness_series(seq: torch.Tensor, tone: ToneMapParams = ToneMapParams()) -> torch.Tensor:
    """Per-frame mean luminance of the tone-mapped sequence, in 8-bit units."""
    if seq.ndim != 4 or seq.shape[1] != 3:
        raise ValueError(f"expected (T, 3, H, W), got {tuple(seq.shape)}")
    tm = tone_map(_as_f64(seq), tone)
    luma = _LUMA[0] * tm[:, 0] + _LUMA[1] * tm[:, 1] + _LUMA[2] * tm[:, 2]
    return 255.0 * luma.mean(dim=(1, 2))


def brightness_stats(pred: torch.Tensor, target: torch.Tensor | None = None,
                     tone: ToneMapParams = ToneMapParams()) -> tuple[float | None, float, float]:
    """(AB, MADB, LSD); AB is None when no reference is given."""
    _require_sequence(pred, "brightness_stats")
    bp = brightness_series(pred, tone)
    ab = None
    if target is not None:
        _check_shapes(pred, target, "brightness_stats")
        bt = brightness_series(target, tone)
        ab = float(torch.mean(torch.abs(bp - bt)))
    madb = float(torch.mean(torch.abs(bp.diff())))
    lsd = float(torch.std(bp, correction=0))
    return ab, madb, lsd


def per_frame_psnr(pred: torch.Tensor, target: torch.Tensor,
                   tone: ToneMapParams = ToneMapParams()) -> list[float]:
    _check_shapes(pred, target, "per_frame_psnr")
    _require_sequence(pred, "per_frame_psnr", min_frames=1)
    return [psnr_mu(pred[i], target[i], tone) for i in range(pred.shape[0])]


def psnr_spread(pred: torch.Tensor, target: torch.Tensor,
                tone: ToneMapParams = ToneMapParams()) -> float:
    """Population standard deviation of the per-frame tone-mapped PSNR values."""
    _require_sequence(pred, "psnr_spread")
    values = torch.tensor(per_frame_psnr(pred, target, tone), dtype=torch.float64)
    return float(torch.std(values, correction=0))


@dataclass
class SequenceReport:
    """All per-sequence metrics plus the per-frame traces used for plots."""

    sequence: str
    frames: int
    psnr_t: float
    ssim_t: float
    t_psnr: float
    t_ssim: float
    psnr_std: float
    ab: float
    madb: float
    lsd: float
    runtime_ms: float = math.nan
    per_frame_psnr: list = field(default_factory=list)
    per_frame_brightness: list = field(default_factory=list)

    COLUMNS = (
        "sequence", "frames", "psnr_t", "ssim_t", "t_psnr", "t_ssim",
        "psnr_std", "ab", "madb", "lsd", "runtime_ms",
    )

    @staticmethod
    def header() -> str:
        return "\t".join(SequenceReport.COLUMNS)

    def to_row(self) -> str:
        cells = [self.sequence, str(self.frames)]
        for name in self.COLUMNS[2:]:
            cells.append(f"{getattr(self, name):.6f}")
        return "\t".join(cells)

    def to_kv_text(self) -> str:
        lines = [f"sequence = {self.sequence}", f"frames = {self.frames}"]
        for name in self.COLUMNS[2:]:
            lines.append(f"{name} = {getattr(self, name):.6f}")
        return "\n".join(lines) + "\n"


def evaluate_sequence(pred: torch.Tensor, target: torch.Tensor, name: str = "sequence",
                      tone: ToneMapParams = ToneMapParams(),
                      runtime_ms: float = math.nan) -> SequenceReport:
    """Compute the full metric suite for one reconstructed sequence.

    Temporal metrics require T >= 2; for shorter sequences they are reported
    as NaN rather than raising.
    """
    _check_shapes(pred, target, "evaluate_sequence")
    _require_sequence(pred, "evaluate_sequence", min_frames=1)
    t = pred.shape[0]
    frame_psnrs = per_frame_psnr(pred, target, tone)
    psnr_t = float(sum(frame_psnrs) / len(frame_psnrs))
    ssim_t = float(sum(ssim_mu(pred[i], target[i], tone) for i in range(t)) / t)
    if t >= 2:
        t_psnr, t_ssim = temporal_stability(pred, target, tone)
        ab, madb, lsd = brightness_stats(pred, target, tone)
        spread = float(torch.std(torch.tensor(frame_psnrs, dtype=torch.float64), correction=0))
    else:
        t_psnr = t_ssim = madb = lsd = spread = math.nan
        ab = float(torch.mean(torch.abs(
            brightness_series(pred, tone) - brightness_series(target, tone))))
    return SequenceReport(
        sequence=name,
        frames=t,
        psnr_t=psnr_t,
        ssim_t=ssim_t,
        t_psnr=t_psnr,
        t_ssim=t_ssim,
        psnr_std=spread,
        ab=ab,
        madb=madb,
        lsd=lsd,
        runtime_ms=runtime_ms,
        per_frame_psnr=frame_psnrs,
        per_frame_brightness=[float(v) for v in brightness_series(pred, tone)],
    )
