"""Radiometric primitives: tone mapping, camera response, exposure simulation.

Everything downstream moves between two pixel domains:

* scene-linear radiance (unitless, >= 0, unbounded above), held by
  :class:`LinearHdrFrame`;
* gamma-encoded, clipped observations in [0, 1], held by :class:`LdrFrame`.

All functions here are pure and thread-safe; randomness is controlled by an
explicit per-call seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class ToneMapParams:
    """Parameters of the logarithmic tone curve t(x) = log(1 + kappa*x) / log(1 + kappa)."""

    kappa: float = 5000.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")


@dataclass(frozen=True)
class CameraResponse:
    """Power-law camera response: encode x -> x**(1/gamma), decode y -> y**gamma."""

    gamma: float = 2.2

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


def _check_frame_pixels(pixels: torch.Tensor, name: str) -> None:
    if not isinstance(pixels, torch.Tensor):
        raise TypeError(f"{name}.pixels must be a torch.Tensor, got {type(pixels)}")
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise ValueError(f"{name}.pixels must have shape (3, H, W), got {tuple(pixels.shape)}")
    if not torch.isfinite(pixels).all():
        raise ValueError(f"{name}.pixels contains non-finite values")


@dataclass
class LinearHdrFrame:
    """A scene-linear radiance frame, shape (3, H, W), all values >= 0 and finite."""

    pixels: torch.Tensor

    def __post_init__(self):
        _check_frame_pixels(self.pixels, "LinearHdrFrame")
        if bool((self.pixels < 0).any()):
            raise ValueError("LinearHdrFrame.pixels must be non-negative")

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


@dataclass
class LdrFrame:
    """A gamma-encoded, clipped observation in [0, 1] taken at a known exposure.

    ``exposure`` is the scalar multiplier applied to radiance in the linear
    domain before encoding; it is needed to invert the rendering.
    """

    pixels: torch.Tensor
    exposure: float = 1.0

    def __post_init__(self):
        _check_frame_pixels(self.pixels, "LdrFrame")
        if bool((self.pixels < 0).any()) or bool((self.pixels > 1).any()):
            raise ValueError("LdrFrame.pixels must lie in [0, 1]")
        if not self.exposure > 0:
            raise ValueError(f"exposure must be > 0, got {self.exposure}")

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


def tone_map(x, params: ToneMapParams = ToneMapParams()):
    """Logarithmic tone curve t(x) = log(1 + kappa*x) / log(1 + kappa).

    Accepts scalars, numpy arrays, torch tensors, or a LinearHdrFrame and
    returns the same kind of object (frames are mapped to their tensor).
    Strictly monotone on [0, inf) with t(0) = 0 and t(1) = 1. Differentiable
    when given a torch tensor with grad enabled.

    Raises ValueError on any negative input.
    """
    if isinstance(x, LinearHdrFrame):
        x = x.pixels
    if isinstance(x, torch.Tensor):
        if bool((x < 0).any()):
            raise ValueError("tone_map is only defined for non-negative inputs")
        return torch.log1p(params.kappa * x) / math.log1p(params.kappa)
    arr = np.asarray(x)
    if np.any(arr < 0):
        raise ValueError("tone_map is only defined for non-negative inputs")
    out = np.log1p(params.kappa * arr) / np.log1p(params.kappa)
    if np.ndim(x) == 0:
        return float(out)
    return out


def tone_map_inverse(y, params: ToneMapParams = ToneMapParams()):
    """Inverse of :func:`tone_map`: x = ((1 + kappa)**y - 1) / kappa.

    Diagnostic helper; exact up to floating-point round-off.
    """
    if isinstance(y, torch.Tensor):
        return torch.expm1(y * math.log1p(params.kappa)) / params.kappa
    arr = np.asarray(y)
    out = np.expm1(arr * np.log1p(params.kappa)) / params.kappa
    if np.ndim(y) == 0:
        return float(out)
    return out


def simulate_exposure(
    hdr: LinearHdrFrame,
    exposure: float,
    response: CameraResponse = CameraResponse(),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> LdrFrame:
    """Render an LDR observation of an HDR frame at the given exposure.

    y = clip((h * e + n) ** (1/gamma), 0, 1) with n ~ N(0, noise_sigma**2)
    added in the linear domain before clipping. Deterministic for a fixed
    seed: two calls with identical arguments are bit-identical.
    """
    if not exposure > 0:
        raise ValueError(f"exposure must be > 0, got {exposure}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    linear = hdr.pixels * exposure
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(tuple(linear.shape)) * noise_sigma
        linear = linear + torch.from_numpy(noise).to(linear.dtype)
    encoded = torch.clamp(linear, min=0) ** (1.0 / response.gamma)
    return LdrFrame(pixels=torch.clamp(encoded, 0.0, 1.0), exposure=float(exposure))


def linearize_ldr(ldr: LdrFrame, response: CameraResponse = CameraResponse()) -> LinearHdrFrame:
    """Invert the camera response and exposure: h = y**gamma / e.

    Round-trips :func:`simulate_exposure` exactly on noise-free, unclipped
    pixels (h * e < 1).
    """
    linear = (ldr.pixels ** response.gamma) / ldr.exposure
    return LinearHdrFrame(pixels=linear)
