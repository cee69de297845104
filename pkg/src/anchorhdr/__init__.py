"""Anchored-exposure HDR video reconstruction.

A two-stage network turns a medium-exposure video stream plus one low/high
exposure anchor pair per window into a temporally stable HDR sequence:
wavelet-domain gated exposure fusion, then a sequence-level residual solver
built on bidirectional propagation and linear-cost temporal mixing. Ships
with the losses, a tone-mapped metric suite, a synthetic data renderer, and
a train/eval/infer/plot CLI.
"""

from .config import RunConfig, load_config
from .consistency import ConsistencyNet, wkv_recurrence
from .fusion import ExposureFusionNet
from .imaging import (
    CameraResponse,
    LdrFrame,
    LinearHdrFrame,
    ToneMapParams,
    linearize_ldr,
    simulate_exposure,
    tone_map,
)
from .losses import (
    LossWeights,
    anchor_consistency_loss,
    spatial_fidelity_loss,
    temporal_gradient_loss,
    total_loss,
)
from .metrics import SequenceReport, evaluate_sequence, psnr_mu, ssim_mu
from .model import ReconstructionModel, build_model, count_parameters
from .wavelet import SubbandSet, dwt_haar, idwt_haar

__version__ = "0.1.0"

__all__ = [
    "CameraResponse",
    "ConsistencyNet",
    "ExposureFusionNet",
    "LdrFrame",
    "LinearHdrFrame",
    "LossWeights",
    "ReconstructionModel",
    "RunConfig",
    "SequenceReport",
    "SubbandSet",
    "ToneMapParams",
    "anchor_consistency_loss",
    "build_model",
    "count_parameters",
    "dwt_haar",
    "evaluate_sequence",
    "idwt_haar",
    "linearize_ldr",
    "load_config",
    "psnr_mu",
    "simulate_exposure",
    "spatial_fidelity_loss",
    "ssim_mu",
    "temporal_gradient_loss",
    "tone_map",
    "total_loss",
    "wkv_recurrence",
]
