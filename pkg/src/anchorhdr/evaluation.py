"""Checkpoint evaluation over a dataset manifest.

For every window the ground truth is loaded, LDR inputs are rendered
deterministically (seeded per sequence), the model reconstructs the HDR
sequence, and the full metric suite is written as one table row. The report
directory receives the tab-separated table, per-frame trace tables, and
rendered figures.
"""

from __future__ import annotations

import dataclasses
import math
import sys
import time
import warnings
from pathlib import Path

import torch

from .checkpoint import load_checkpoint
from .config import RunConfig, config_hash
from .datagen import build_capture_schedule, load_manifest, load_video_frames, render_ldr_sequence
from .imaging import CameraResponse, ToneMapParams
from .metrics import SequenceReport, evaluate_sequence
from .model import model_from_checkpoint, radiance_view
from .plotting import render_per_frame_trace, render_speed_quality_scatter
from .training import with_linearized

REPORT_NAME = "report.tsv"


def _aggregate(reports: list) -> SequenceReport:
    def mean(name):
        values = [getattr(r, name) for r in reports if not math.isnan(getattr(r, name))]
        return float(sum(values) / len(values)) if values else math.nan

    return SequenceReport(
        sequence="AGGREGATE",
        frames=sum(r.frames for r in reports),
        psnr_t=mean("psnr_t"),
        ssim_t=mean("ssim_t"),
        t_psnr=mean("t_psnr"),
        t_ssim=mean("t_ssim"),
        psnr_std=mean("psnr_std"),
        ab=mean("ab"),
        madb=mean("madb"),
        lsd=mean("lsd"),
        runtime_ms=mean("runtime_ms"),
    )


def evaluate_checkpoint(ckpt_path, manifest_path, out_dir,
                        config: RunConfig | None = None) -> tuple:
    """Evaluate a checkpoint on a manifest; returns (report path, reports).

    The configuration embedded in the checkpoint drives the run; passing an
    explicit ``config`` overrides it, with a warning when its hash differs
    from the checkpoint's.
    """
    ckpt = load_checkpoint(ckpt_path)
    if config is None:
        config = ckpt.config
    elif config_hash(config) != config_hash(ckpt.config):
        warnings.warn(
            f"config hash mismatch: checkpoint carries {config_hash(ckpt.config)[:12]}, "
            f"evaluation uses {config_hash(config)[:12]}",
            stacklevel=2,
        )
    model = model_from_checkpoint(ckpt)
    schedule = build_capture_schedule(config.schedule)
    tone = ToneMapParams(config.loss.kappa)
    response = CameraResponse(config.camera.gamma)
    seed = config.train.seed if config.train.seed is not None else 0

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    window_dirs = load_manifest(manifest_path)
    if not window_dirs:
        raise ValueError(f"manifest {manifest_path} lists no windows")

    reports = []
    for idx, window_dir in enumerate(window_dirs):
        name = window_dir.name
        try:
            frames = load_video_frames(window_dir, response=response)
            if not frames:
                raise ValueError("window directory is empty")
            sched = schedule
            if len(frames) < schedule.t:
                sched = dataclasses.replace(
                    schedule,
                    t=len(frames),
                    anchor_timestamp=min(schedule.anchor_timestamp, len(frames)),
                    anchor_timestamp_b=min(schedule.anchor_timestamp_b, len(frames)),
                )
            sample = render_ldr_sequence(
                frames[:sched.t], sched, noise_sigmas=config.noise.as_tuple(),
                response=response, seed=seed + idx,
            )
            backbone, low, high = sample.backbone, sample.anchors_a[0], sample.anchors_a[1]
            if config.model.six_channel_inputs:
                e1, _, e3 = sched.exposures
                backbone = with_linearized(backbone, list(sample.frame_exposures), response.gamma)
                low = with_linearized(low[None], e1, response.gamma)[0]
                high = with_linearized(high[None], e3, response.gamma)[0]
            started = time.perf_counter()
            with torch.no_grad():
                x, _ = model(backbone, low, high)
            runtime_ms = (time.perf_counter() - started) * 1000.0
            report = evaluate_sequence(radiance_view(x), sample.gt, name=name, tone=tone,
                                       runtime_ms=runtime_ms)
        except (ValueError, FileNotFoundError) as exc:
            print(f"skipping {name}: {exc}", file=sys.stderr)
            continue
        reports.append(report)
        with open(out / f"{name}_frames.tsv", "w") as fh:
            fh.write("frame\tpsnr\tbrightness\n")
            for i, (p, b) in enumerate(zip(report.per_frame_psnr, report.per_frame_brightness)):
                fh.write(f"{i + 1}\t{p:.6f}\t{b:.6f}\n")
        render_per_frame_trace(report.per_frame_psnr, out / f"trace_{name}.png", label=name)

    if not reports:
        raise ValueError("no sequence could be evaluated")
    agg = _aggregate(reports)
    report_path = out / REPORT_NAME
    with open(report_path, "w") as fh:
        fh.write(SequenceReport.header() + "\n")
        for r in reports:
            fh.write(r.to_row() + "\n")
        fh.write(agg.to_row() + "\n")
    render_speed_quality_scatter([("this run", agg.runtime_ms, agg.psnr_t)], out / "scatter.png")
    return report_path, reports
