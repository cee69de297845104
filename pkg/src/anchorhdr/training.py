"""Training loop: Adam with cosine learning-rate decay, deterministic seeding.

Each step samples a window from the manifest, renders a training sample with
two anchor pairs, runs stage 1 on both pairs and stage 2 on the first, and
optimizes the weighted objective. Stage 2 never sees the second pair; it
exists only for the anchor-consistency term.

With ``train.sequential`` (the default) torch is pinned to one thread, so a
fixed seed reproduces the loss trace bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .config import RunConfig, require_seed
from .datagen import build_capture_schedule, load_manifest, load_video_frames, make_training_sample
from .imaging import CameraResponse, ToneMapParams
from .losses import (
    LossWeights,
    anchor_consistency_loss,
    spatial_fidelity_loss,
    temporal_gradient_loss,
    total_loss,
)
from .model import build_model, count_parameters, radiance_view


def cosine_lr(step: int, max_steps: int, lr_initial: float, lr_final: float) -> float:
    """Cosine decay from lr_initial at step 0 to lr_final at max_steps."""
    if max_steps <= 0:
        return lr_initial
    frac = min(max(step / max_steps, 0.0), 1.0)
    return lr_final + 0.5 * (lr_initial - lr_final) * (1.0 + math.cos(math.pi * frac))


def with_linearized(pixels: torch.Tensor, exposure, gamma: float) -> torch.Tensor:
    """Append inverse-response channels: cat(y, y**gamma / e) along channels.

    ``exposure`` is a scalar or a per-frame list matching the temporal axis.
    """
    if isinstance(exposure, (list, tuple)):
        e = torch.tensor(exposure, dtype=pixels.dtype).view(-1, 1, 1, 1)
    else:
        e = exposure
    return torch.cat((pixels, pixels ** gamma / e), dim=-3)


@dataclass
class TrainResult:
    final_checkpoint: Path
    log_path: Path
    history: list  # one dict per step


def _prepare_batch(windows, config: RunConfig, schedule, rng) -> dict:
    backbone, a_low, a_high, b_low, b_high, gt = [], [], [], [], [], []
    exposures = None
    for _ in range(config.train.batch_size):
        frames = windows[int(rng.integers(0, len(windows)))]
        start = int(rng.integers(0, len(frames) - schedule.t + 1))
        sample = make_training_sample(
            frames[start:start + schedule.t],
            schedule,
            noise_sigmas=config.noise.as_tuple(),
            response=CameraResponse(config.camera.gamma),
            crop=config.data.crop,
            augment=True,
            seed=int(rng.integers(0, 2 ** 31 - 1)),
        )
        backbone.append(sample.backbone)
        a_low.append(sample.anchors_a[0])
        a_high.append(sample.anchors_a[1])
        b_low.append(sample.anchors_b[0])
        b_high.append(sample.anchors_b[1])
        gt.append(sample.gt)
        exposures = sample.frame_exposures
    batch = {
        "backbone": torch.stack(backbone),
        "a_low": torch.stack(a_low),
        "a_high": torch.stack(a_high),
        "b_low": torch.stack(b_low),
        "b_high": torch.stack(b_high),
        "gt": torch.stack(gt),
    }
    if config.model.six_channel_inputs:
        e1, _, e3 = schedule.exposures
        gamma = config.camera.gamma
        batch["backbone"] = with_linearized(batch["backbone"], list(exposures), gamma)
        for key, e in (("a_low", e1), ("a_high", e3), ("b_low", e1), ("b_high", e3)):
            batch[key] = with_linearized(batch[key], e, gamma)
    return batch


def train(config: RunConfig, work_dir=None) -> TrainResult:
    """Run the full training loop and return the final checkpoint path.

    ``work_dir`` resolves the relative checkpoint/report directories; it
    defaults to the current directory.
    """
    seed = require_seed(config)
    if not config.data.manifest:
        raise ValueError("data.manifest must point to a dataset manifest")
    base = Path(work_dir) if work_dir is not None else Path.cwd()
    manifest = Path(config.data.manifest)
    if not manifest.is_absolute():
        manifest = base / manifest
    if not manifest.exists():
        raise FileNotFoundError(f"manifest {manifest} does not exist")
    ckpt_dir = base / config.paths.checkpoint_dir
    report_dir = base / config.paths.report_dir
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    report_dir.mkdir(parents=True, exist_ok=True)

    previous_threads = torch.get_num_threads()
    if config.train.sequential:
        torch.set_num_threads(1)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    window_dirs = load_manifest(manifest)
    if not window_dirs:
        raise ValueError(f"manifest {manifest} lists no windows")
    windows = [load_video_frames(d) for d in window_dirs]
    schedule = build_capture_schedule(config.schedule)
    for d, frames in zip(window_dirs, windows):
        if len(frames) < schedule.t:
            raise ValueError(f"window {d} has {len(frames)} frames, need at least {schedule.t}")

    model = build_model(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.train.lr_initial)
    tone = ToneMapParams(config.loss.kappa)
    weights = LossWeights(config.loss.lambda_t, config.loss.lambda_z)

    log_path = report_dir / "train_log.tsv"
    history: list = []
    started = time.perf_counter()
    print(f"training: {count_parameters(model)} parameters, "
          f"{config.train.max_steps} steps, seed {seed}")

    try:
        with open(log_path, "w") as log:
            log.write("step\tlr\tloss_total\tloss_spatial\tloss_temporal\tloss_anchor\n")
            for step in range(1, config.train.max_steps + 1):
                lr = cosine_lr(step - 1, config.train.max_steps, config.train.lr_initial,
                               config.train.lr_final)
                for group in optimizer.param_groups:
                    group["lr"] = lr

                batch = _prepare_batch(windows, config, schedule, rng)
                z_a = model.fusion(batch["backbone"], batch["a_low"], batch["a_high"])
                z_b = model.fusion(batch["backbone"], batch["b_low"], batch["b_high"])
                x = model.refiner(z_a)
                pred = radiance_view(x)

                l_s = spatial_fidelity_loss(pred, batch["gt"], tone)
                if schedule.t >= 2:
                    l_t = temporal_gradient_loss(pred, batch["gt"], tone)
                else:
                    l_t = torch.zeros(())
                l_z = anchor_consistency_loss(z_a, z_b)
                loss = total_loss(l_s, l_t, l_z, weights)

                optimizer.zero_grad()
                loss.backward()
                optimizer.step()

                entry = {
                    "step": step,
                    "lr": lr,
                    "loss_total": float(loss.detach()),
                    "loss_spatial": float(l_s.detach()),
                    "loss_temporal": float(l_t.detach()),
                    "loss_anchor": float(l_z.detach()),
                }
                history.append(entry)
                log.write("{step}\t{lr:.8e}\t{loss_total:.8e}\t{loss_spatial:.8e}"
                          "\t{loss_temporal:.8e}\t{loss_anchor:.8e}\n".format(**entry))
                if config.train.log_every and step % config.train.log_every == 0:
                    print(f"step {step}: loss {entry['loss_total']:.5f} "
                          f"(s {entry['loss_spatial']:.5f}, t {entry['loss_temporal']:.5f}, "
                          f"z {entry['loss_anchor']:.5f}) lr {lr:.2e}")
                if config.train.checkpoint_every and step % config.train.checkpoint_every == 0:
                    save_checkpoint(ckpt_dir / f"step_{step:06d}.ckpt", model, optimizer,
                                    step, config)

        final = ckpt_dir / "final.ckpt"
        save_checkpoint(final, model, optimizer, len(history), config)
    finally:
        torch.set_num_threads(previous_threads)
    elapsed = time.perf_counter() - started
    print(f"training finished in {elapsed:.1f}s, checkpoint {final}")
    return TrainResult(final_checkpoint=final, log_path=log_path, history=history)
