"""Deterministic binary checkpoints.

A checkpoint stores everything needed to resume or evaluate a run: both
stages' parameters, the Adam state, the step counter, and the full canonical
config text (plus its sha256). The format is byte-deterministic: saving the
same state twice, or saving a loaded checkpoint again, produces identical
bytes.

Layout (little-endian):

    magic "AHC1" | u32 version | u64 step
    u32 config length | config utf-8 | 32-byte sha256 of the config text
    u32 entry count, then per entry (sorted by name):
        u16 name length | name utf-8 | u8 dtype code | u8 ndim | u32 dims...
        raw tensor bytes

dtype codes: 0 = float32, 1 = float64, 2 = int64.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, apply_values, config_to_text, parse_config_text

MAGIC = b"AHC1"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {torch.float32: 0, torch.float64: 1, torch.int64: 2}


@dataclass
class Checkpoint:
    config: RunConfig
    config_text: str
    config_sha: str
    step: int
    model_state: dict
    optim_state: dict


def _flatten_optimizer(optimizer) -> dict:
    out = {}
    if optimizer is None:
        return out
    state = optimizer.state_dict()["state"]
    for idx, entry in state.items():
        for key, value in entry.items():
            if isinstance(value, torch.Tensor):
                out[f"{idx}.{key}"] = value
            else:
                out[f"{idx}.{key}"] = torch.tensor(float(value), dtype=torch.float64)
    return out


def _write_entries(parts: list, entries: dict, prefix: str) -> int:
    count = 0
    for name in sorted(entries):
        tensor = entries[name].detach().cpu().contiguous()
        code = _CODES.get(tensor.dtype)
        if code is None:
            raise TypeError(f"cannot serialize tensor {name!r} of dtype {tensor.dtype}")
        full = f"{prefix}{name}".encode("utf-8")
        arr = tensor.numpy().astype(_DTYPES[code], copy=False)
        parts.append(struct.pack("<H", len(full)) + full)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(arr.tobytes())
        count += 1
    return count


def save_checkpoint(path, model, optimizer, step: int, config: RunConfig) -> None:
    config_text = config_to_text(config)
    sha = hashlib.sha256(config_text.encode("utf-8")).digest()
    body: list = []
    n_model = _write_entries(body, dict(model.state_dict()), "model/")
    n_optim = _write_entries(body, _flatten_optimizer(optimizer), "optim/")
    header = MAGIC + struct.pack("<IQ", VERSION, step)
    cfg_block = struct.pack("<I", len(config_text.encode("utf-8")))
    cfg_block += config_text.encode("utf-8") + sha
    count = struct.pack("<I", n_model + n_optim)
    Path(path).write_bytes(header + cfg_block + count + b"".join(body))


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (magic {data[:4]!r})")
    version, step = struct.unpack_from("<IQ", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    (cfg_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    config_text = data[pos:pos + cfg_len].decode("utf-8")
    pos += cfg_len
    sha = data[pos:pos + 32]
    pos += 32
    if hashlib.sha256(config_text.encode("utf-8")).digest() != sha:
        raise ValueError(f"{path}: embedded config does not match its hash")
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    model_state: dict = {}
    optim_state: dict = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        code, ndim = struct.unpack_from("<BB", data, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", data, pos) if ndim else ()
        pos += 4 * ndim
        dtype = _DTYPES[code]
        n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(data, dtype, n_items, pos).reshape(shape).copy()
        pos += n_items * dtype.itemsize
        tensor = torch.from_numpy(arr)
        if name.startswith("model/"):
            model_state[name[len("model/"):]] = tensor
        elif name.startswith("optim/"):
            optim_state[name[len("optim/"):]] = tensor
        else:
            raise ValueError(f"{path}: unknown entry {name!r}")
    config = apply_values(RunConfig(), parse_config_text(config_text))
    return Checkpoint(
        config=config,
        config_text=config_text,
        config_sha=sha.hex(),
        step=step,
        model_state=model_state,
        optim_state=optim_state,
    )


def restore_optimizer(optimizer, checkpoint: Checkpoint) -> None:
    """Load flattened Adam state back into a freshly built optimizer."""
    if not checkpoint.optim_state:
        return
    grouped: dict = {}
    for key, tensor in checkpoint.optim_state.items():
        idx, _, field_name = key.partition(".")
        grouped.setdefault(int(idx), {})[field_name] = tensor
    base = optimizer.state_dict()
    base["state"] = grouped
    optimizer.load_state_dict(base)
