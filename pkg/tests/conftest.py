"""Shared test helpers: finite-difference gradient checking and tiny fixtures."""

from __future__ import annotations

import numpy as np
import pytest
import torch


def rel_error(a: float, b: float, floor: float = 1e-7) -> float:
    """Relative disagreement; tiny values are compared absolutely."""
    scale = max(abs(a), abs(b))
    if scale < floor:
        return abs(a - b)
    return abs(a - b) / scale


def fd_vs_autograd(fn, leaf: torch.Tensor, index, eps: float = 1e-5):
    """Compare autograd with a central finite difference at one entry of ``leaf``.

    ``fn`` recomputes the scalar objective from current state; ``leaf`` must
    be a float64 tensor with requires_grad (a parameter or an input).
    Returns (analytic, finite_difference).
    """
    if leaf.grad is not None:
        leaf.grad = None
    fn().backward()
    analytic = float(leaf.grad[index])
    with torch.no_grad():
        original = float(leaf[index])
        leaf[index] = original + eps
        f_plus = float(fn())
        leaf[index] = original - eps
        f_minus = float(fn())
        leaf[index] = original
    return analytic, (f_plus - f_minus) / (2.0 * eps)


def check_module_grads(module: torch.nn.Module, fn, rng: np.random.Generator,
                       tol: float = 1e-3, draws_per_call: int = 2,
                       only: list | None = None) -> None:
    """FD-check a few randomly chosen parameter entries of a float64 module."""
    params = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    if only is not None:
        params = [(n, p) for n, p in params if any(n.startswith(o) for o in only)]
    assert params
    for _ in range(draws_per_call):
        name, param = params[int(rng.integers(0, len(params)))]
        flat_index = int(rng.integers(0, param.numel()))
        index = np.unravel_index(flat_index, tuple(param.shape))
        analytic, fd = fd_vs_autograd(fn, param, index)
        assert rel_error(analytic, fd) < tol, (
            f"{name}{list(index)}: autograd {analytic:.6e} vs fd {fd:.6e}"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_f64(rng, *shape, lo=-1.0, hi=1.0) -> torch.Tensor:
    return torch.tensor(rng.uniform(lo, hi, shape), dtype=torch.float64)
