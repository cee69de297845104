"""Single-level orthonormal Haar analysis/synthesis over multi-channel grids.

The analysis splits a grid into four half-resolution subbands:

* ``ll`` low-pass in both directions (coarse structure, fusion domain),
* ``lh`` vertical detail (high-pass across rows),
* ``hl`` horizontal detail (high-pass across columns),
* ``hh`` diagonal detail.

Filters are 1/sqrt(2)-normalized per axis so the transform is orthonormal:
energy is preserved and the inverse is the exact transpose. Sign convention
for a 2x2 block [[a, b], [c, d]]:

    ll = (a + b + c + d) / 2      lh = (a + b - c - d) / 2
    hl = (a - b + c - d) / 2      hh = (a - b - c + d) / 2

Pure functions, thread-safe, differentiable under torch autograd, and
shape-generic: any leading dimensions are allowed, the transform acts on the
trailing two axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class SubbandSet:
    """The four subbands of a single-level 2-D Haar decomposition."""

    ll: torch.Tensor
    lh: torch.Tensor
    hl: torch.Tensor
    hh: torch.Tensor

    def __post_init__(self):
        shape = self.ll.shape
        for name in ("lh", "hl", "hh"):
            band = getattr(self, name)
            if band.shape != shape:
                raise ValueError(
                    f"subband {name} has shape {tuple(band.shape)}, expected {tuple(shape)}"
                )


def dwt_haar(f: torch.Tensor) -> SubbandSet:
    """Orthonormal single-level Haar analysis of ``f`` over its last two axes.

    Requires even height and width; no implicit padding is performed.
    """
    h, w = f.shape[-2], f.shape[-1]
    if h % 2 != 0 or w % 2 != 0:
        raise ValueError(f"dwt_haar requires even spatial dims, got ({h}, {w})")
    a = f[..., 0::2, 0::2]
    b = f[..., 0::2, 1::2]
    c = f[..., 1::2, 0::2]
    d = f[..., 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a + b - c - d) * 0.5
    hl = (a - b + c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return SubbandSet(ll=ll, lh=lh, hl=hl, hh=hh)


def idwt_haar(s: SubbandSet) -> torch.Tensor:
    """Exact inverse of :func:`dwt_haar`."""
    ll, lh, hl, hh = s.ll, s.lh, s.hl, s.hh
    a = (ll + lh + hl + hh) * 0.5
    b = (ll + lh - hl - hh) * 0.5
    c = (ll - lh + hl - hh) * 0.5
    d = (ll - lh - hl + hh) * 0.5
    h2, w2 = ll.shape[-2], ll.shape[-1]
    lead = ll.shape[:-2]
    # Interleave columns, then rows; stack/reshape keeps autograd intact.
    top = torch.stack((a, b), dim=-1).reshape(*lead, h2, 2 * w2)
    bottom = torch.stack((c, d), dim=-1).reshape(*lead, h2, 2 * w2)
    return torch.stack((top, bottom), dim=-2).reshape(*lead, 2 * h2, 2 * w2)
