"""Synthetic capture rendering: LDR windows with exposure anchors from HDR truth.

A capture window is a length-T ground-truth radiance sequence rendered to:

* a medium-exposure backbone (one LDR frame per ground-truth frame),
* one low/high anchor pair taken at a single timestamp within the window,
* optionally a second anchor pair at another timestamp, used only by the
  anchor-consistency objective during training.

Rendering is deterministic given (source frames, schedule, seed); sample
generation is embarrassingly parallel across windows since every call owns
its seed.

The module also contains a small procedural scene generator so the whole
pipeline (gen-data, train, eval, infer) runs without any external dataset.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, ScheduleConfig, require_seed
from .frameio import load_linear_frame, save_hdr_frame
from .imaging import CameraResponse, LdrFrame, LinearHdrFrame, simulate_exposure

SUPPORTED_FRAME_SUFFIXES = (".png", ".hdr", ".raw")


@dataclass(frozen=True)
class CaptureSchedule:
    """How a ground-truth window is turned into LDR observations.

    ``anchor_timestamp`` and ``anchor_timestamp_b`` are 1-based frame indices
    within the window; ``exposures`` is the strictly increasing
    (low, medium, high) multiplier triple.
    """

    mode: str = "fixed_reference"
    t: int = 5
    anchors_per_window: int = 1
    anchor_timestamp: int = 3
    anchor_timestamp_b: int = 1
    exposures: tuple = (0.25, 1.0, 4.0)

    def __post_init__(self):
        if self.mode not in ("fixed_reference", "alternating"):
            raise ValueError(f"unknown capture mode {self.mode!r}")
        if self.t < 1:
            raise ValueError(f"window length must be >= 1, got {self.t}")
        if self.anchors_per_window != 1:
            raise ValueError("only one anchor pair per window is supported")
        for stamp in (self.anchor_timestamp, self.anchor_timestamp_b):
            if not 1 <= stamp <= self.t:
                raise ValueError(f"anchor timestamp {stamp} outside window 1..{self.t}")
        e1, e2, e3 = self.exposures
        if not (0 < e1 < e2 < e3):
            raise ValueError(f"exposures must be strictly increasing and positive, got {self.exposures}")

    def exposure_for_frame(self, index: int) -> float:
        """Exposure of backbone frame ``index`` (0-based within the window)."""
        if self.mode == "fixed_reference":
            return self.exposures[1]
        return self.exposures[index % 3]


def build_capture_schedule(config: ScheduleConfig) -> CaptureSchedule:
    """Materialize a schedule from config; stop separation s gives e = 2**(+-s)."""
    e2 = 1.0
    e1 = 2.0 ** (-config.stops)
    e3 = 2.0 ** (+config.stops)
    return CaptureSchedule(
        mode=config.mode,
        t=config.t,
        anchors_per_window=config.anchors_per_window,
        anchor_timestamp=config.anchor_timestamp,
        anchor_timestamp_b=config.anchor_timestamp_b,
        exposures=(e1, e2, e3),
    )


@dataclass
class TrainingSample:
    """One rendered window: network inputs plus ground truth.

    backbone: (T, 3, H, W) LDR pixels; gt: (T, 3, H, W) linear radiance;
    anchors are (low, high) pixel tensors of shape (3, H, W) each.
    """

    backbone: torch.Tensor
    anchors_a: tuple
    anchors_b: tuple | None
    gt: torch.Tensor
    schedule: CaptureSchedule
    frame_exposures: list


def _render_frame(gt: LinearHdrFrame, exposure: float, sigma: float,
                  response: CameraResponse, seed: int) -> LdrFrame:
    return simulate_exposure(gt, exposure, response, noise_sigma=sigma, seed=seed)


def _noise_for_exposure(schedule: CaptureSchedule, exposure: float, sigmas: tuple) -> float:
    e1, e2, e3 = schedule.exposures
    return {e1: sigmas[0], e2: sigmas[1], e3: sigmas[2]}[exposure]


def render_ldr_sequence(
    gt_frames: list,
    schedule: CaptureSchedule,
    noise_sigmas: tuple = (0.0, 0.0, 0.0),
    response: CameraResponse = CameraResponse(),
    seed: int = 0,
) -> TrainingSample:
    """Render the backbone and the primary anchor pair from a GT window.

    ``noise_sigmas`` holds the linear-domain Gaussian sigma per exposure
    (low, medium, high). Deterministic for a fixed seed.
    """
    if len(gt_frames) != schedule.t:
        raise ValueError(f"expected {schedule.t} ground-truth frames, got {len(gt_frames)}")
    rng = np.random.default_rng(seed)
    frame_seeds = rng.integers(0, 2 ** 31 - 1, size=len(gt_frames) + 2)
    frames = []
    exposures = []
    for i, gt in enumerate(gt_frames):
        e = schedule.exposure_for_frame(i)
        sigma = _noise_for_exposure(schedule, e, noise_sigmas)
        frames.append(_render_frame(gt, e, sigma, response, int(frame_seeds[i])))
        exposures.append(e)
    anchor_gt = gt_frames[schedule.anchor_timestamp - 1]
    e1, _, e3 = schedule.exposures
    low = _render_frame(anchor_gt, e1, noise_sigmas[0], response, int(frame_seeds[-2]))
    high = _render_frame(anchor_gt, e3, noise_sigmas[2], response, int(frame_seeds[-1]))
    return TrainingSample(
        backbone=torch.stack([f.pixels for f in frames]),
        anchors_a=(low.pixels, high.pixels),
        anchors_b=None,
        gt=torch.stack([g.pixels for g in gt_frames]),
        schedule=schedule,
        frame_exposures=exposures,
    )


def make_training_sample(
    gt_window: list,
    schedule: CaptureSchedule,
    noise_sigmas: tuple = (0.0, 0.0, 0.0),
    response: CameraResponse = CameraResponse(),
    crop: int | None = None,
    augment: bool = True,
    seed: int = 0,
) -> TrainingSample:
    """Full training sample: both anchor pairs, random crop, random rotation.

    The same crop offsets and rotation are applied jointly to ground truth
    and, through rendering, to every LDR frame, so spatial correspondence is
    preserved exactly. The second anchor pair is rendered at
    ``schedule.anchor_timestamp_b`` with the same exposures.
    """
    if len(gt_window) < schedule.t:
        raise ValueError(f"window of {len(gt_window)} frames is shorter than T={schedule.t}")
    gt_frames = gt_window[: schedule.t]
    rng = np.random.default_rng(seed)

    pixels = [g.pixels for g in gt_frames]
    if crop is not None:
        h, w = pixels[0].shape[-2:]
        if crop > h or crop > w:
            raise ValueError(f"crop {crop} exceeds source size ({h}, {w})")
        top = int(rng.integers(0, h - crop + 1))
        left = int(rng.integers(0, w - crop + 1))
        pixels = [p[:, top:top + crop, left:left + crop] for p in pixels]
    if augment:
        quarter_turns = int(rng.integers(0, 4))
        if quarter_turns:
            pixels = [torch.rot90(p, quarter_turns, dims=(-2, -1)) for p in pixels]
    gt_frames = [LinearHdrFrame(pixels=p.contiguous()) for p in pixels]

    render_seed = int(rng.integers(0, 2 ** 31 - 1))
    sample = render_ldr_sequence(gt_frames, schedule, noise_sigmas, response, seed=render_seed)

    anchor_gt_b = gt_frames[schedule.anchor_timestamp_b - 1]
    e1, _, e3 = schedule.exposures
    seeds_b = np.random.default_rng(render_seed + 1).integers(0, 2 ** 31 - 1, size=2)
    low_b = _render_frame(anchor_gt_b, e1, noise_sigmas[0], response, int(seeds_b[0]))
    high_b = _render_frame(anchor_gt_b, e3, noise_sigmas[2], response, int(seeds_b[1]))
    sample.anchors_b = (low_b.pixels, high_b.pixels)
    return sample


# ---------------------------------------------------------------------------
# Frame and manifest loading
# ---------------------------------------------------------------------------

def load_video_frames(path, frame_range: tuple | None = None,
                      response: CameraResponse = CameraResponse()) -> list:
    """Load a directory of frames to the linear domain, sorted by filename.

    PNG frames are inverse-gamma decoded; .hdr/.raw frames are read as-is.
    An empty directory yields an empty list; mixed resolutions are an error.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix in SUPPORTED_FRAME_SUFFIXES)
    if frame_range is not None:
        files = files[frame_range[0]:frame_range[1]]
    frames = [load_linear_frame(p, response) for p in files]
    shapes = {tuple(f.pixels.shape) for f in frames}
    if len(shapes) > 1:
        raise ValueError(f"{directory}: mixed frame resolutions {sorted(shapes)}")
    return frames


def load_manifest(path) -> list:
    """Read a line-oriented manifest of window directories (relative to it)."""
    manifest = Path(path)
    base = manifest.parent
    dirs = []
    for raw in manifest.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        entry = Path(line)
        dirs.append(entry if entry.is_absolute() else base / entry)
    return dirs


# ---------------------------------------------------------------------------
# Procedural scenes
# ---------------------------------------------------------------------------

def synthesize_scene_window(
    num_frames: int,
    height: int,
    width: int,
    velocity: tuple = (0.0, 0.0),
    stops: float = 6.0,
    seed: int = 0,
) -> list:
    """Procedural HDR window: a static radiance ramp plus a moving bright patch.

    The background sweeps ``stops`` stops of dynamic range horizontally; a
    square patch at radiance 2**(stops/2) moves by ``velocity`` pixels per
    frame (zero velocity gives a static scene). Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, 1.0, width, dtype=np.float32)
    ramp = 2.0 ** (stops * (xs - 0.5))
    base = np.broadcast_to(ramp, (height, width)).astype(np.float32)
    tint = rng.uniform(0.6, 1.0, size=3).astype(np.float32)

    size = int(rng.integers(max(4, height // 8), max(5, height // 3)))
    y0 = float(rng.integers(0, max(1, height - size)))
    x0 = float(rng.integers(0, max(1, width - size)))
    patch_value = np.float32(2.0 ** (stops / 2.0))

    frames = []
    for i in range(num_frames):
        img = np.stack([base * t for t in tint])
        top = int(round(y0 + velocity[1] * i)) % max(1, height - size)
        left = int(round(x0 + velocity[0] * i)) % max(1, width - size)
        img[:, top:top + size, left:left + size] = patch_value
        frames.append(LinearHdrFrame(pixels=torch.from_numpy(img)))
    return frames


def write_window(directory, frames: list, fmt: str = "raw") -> None:
    """Write a GT window as frame_%03d.<fmt> files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_hdr_frame(frame, directory / f"frame_{i:03d}.{fmt}")


def generate_dataset(config: RunConfig, out_dir) -> Path:
    """Render a procedural dataset and manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(require_seed(config))
    names = []
    for i in range(config.data.num_windows):
        moving = i % 2 == 1  # alternate static and moving windows
        speed = float(config.data.motion) if moving else 0.0
        frames = synthesize_scene_window(
            num_frames=config.data.frames_per_window,
            height=config.data.height,
            width=config.data.width,
            velocity=(speed, speed / 2.0),
            seed=int(rng.integers(0, 2 ** 31 - 1)),
        )
        name = f"window_{i:03d}"
        write_window(out / name, frames, fmt=config.data.format)
        names.append(name)
    manifest = out / "manifest.txt"
    manifest.write_text("".join(f"{n}\n" for n in names))
    return manifest
