"""Inference on a directory of captured LDR frames.

Expected directory layout:

    frames/
      anchor_low.png    low-exposure anchor
      anchor_high.png   high-exposure anchor
      <anything>.png    backbone frames, consumed in filename order

Outputs ``hdr_%03d.hdr`` (or ``.raw``) radiance frames plus ``preview_%03d.png``
tone-mapped 8-bit previews, index-matched to the backbone frames.
"""

from __future__ import annotations

from pathlib import Path

import torch

from .checkpoint import load_checkpoint
from .datagen import build_capture_schedule
from .frameio import load_ldr_frame, save_hdr_frame, save_ldr_frame
from .imaging import LdrFrame, LinearHdrFrame, ToneMapParams, tone_map
from .model import model_from_checkpoint, radiance_view
from .training import with_linearized

ANCHOR_LOW_NAME = "anchor_low.png"
ANCHOR_HIGH_NAME = "anchor_high.png"


def run_inference(ckpt_path, frames_dir, out_dir, fmt: str = "hdr") -> list:
    """Reconstruct one window; returns the written HDR frame paths."""
    if fmt not in ("hdr", "raw"):
        raise ValueError(f"unsupported output format {fmt!r} (use hdr or raw)")
    frames_dir = Path(frames_dir)
    low_path = frames_dir / ANCHOR_LOW_NAME
    high_path = frames_dir / ANCHOR_HIGH_NAME
    if not low_path.exists() or not high_path.exists():
        raise FileNotFoundError(
            f"{frames_dir} must contain {ANCHOR_LOW_NAME} and {ANCHOR_HIGH_NAME}"
        )
    backbone_paths = sorted(
        p for p in frames_dir.glob("*.png") if p.name not in (ANCHOR_LOW_NAME, ANCHOR_HIGH_NAME)
    )
    if not backbone_paths:
        raise FileNotFoundError(f"{frames_dir} contains no backbone frames")

    ckpt = load_checkpoint(ckpt_path)
    config = ckpt.config
    model = model_from_checkpoint(ckpt)
    schedule = build_capture_schedule(config.schedule)
    e1, e2, e3 = schedule.exposures
    tone = ToneMapParams(config.loss.kappa)

    backbone = torch.stack([load_ldr_frame(p, exposure=e2).pixels for p in backbone_paths])
    low = load_ldr_frame(low_path, exposure=e1).pixels
    high = load_ldr_frame(high_path, exposure=e3).pixels
    if config.model.six_channel_inputs:
        gamma = config.camera.gamma
        backbone = with_linearized(backbone, e2, gamma)
        low = with_linearized(low[None], e1, gamma)[0]
        high = with_linearized(high[None], e3, gamma)[0]

    with torch.no_grad():
        x, _ = model(backbone, low, high)
    radiance = radiance_view(x)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(radiance.shape[0]):
        frame = LinearHdrFrame(pixels=radiance[i])
        hdr_path = out / f"hdr_{i:03d}.{fmt}"
        save_hdr_frame(frame, hdr_path)
        preview = LdrFrame(pixels=torch.clamp(tone_map(radiance[i], tone), 0.0, 1.0))
        save_ldr_frame(preview, out / f"preview_{i:03d}.png")
        written.append(hdr_path)
    return written
