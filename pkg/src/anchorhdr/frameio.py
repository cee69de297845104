"""Frame file formats: PNG (8/16-bit), Radiance RGBE ``.hdr``, and raw floats.

All three codecs are implemented on the standard library plus numpy so that
byte output is fully deterministic.

PNG support covers what this project reads and writes: color types 0 (gray),
2 (RGB) and 6 (RGBA, alpha dropped on read), bit depths 8 and 16, no
interlacing. Files are written with filter type 0 scanlines.

The raw float format is a 16-byte header followed by little-endian float32
samples, row-major, channel-interleaved:

    bytes 0..3   magic "LCAT"
    bytes 4..7   u32 height
    bytes 8..11  u32 width
    bytes 12..15 u32 channels

Radiance files are written as flat (uncompressed) RGBE scanlines and read in
both flat and adaptive run-length encoded form.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np
import torch

from .imaging import CameraResponse, LdrFrame, LinearHdrFrame

RAW_MAGIC = b"LCAT"
_PNG_SIG = b"\x89PNG\r\n\x1a\n"


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------

def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def write_png(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Write an (H, W) or (H, W, 3) float array in [0, 1] as a PNG file."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W), (H, W, 1) or (H, W, 3) image, got {arr.shape}")
    maxval = (1 << bit_depth) - 1
    quant = np.clip(np.rint(np.clip(arr, 0.0, 1.0) * maxval), 0, maxval)
    color_type = 0 if quant.shape[2] == 1 else 2
    if bit_depth == 8:
        raw = quant.astype(np.uint8).tobytes()
        row_bytes = quant.shape[1] * quant.shape[2]
    else:
        raw = quant.astype(">u2").tobytes()
        row_bytes = quant.shape[1] * quant.shape[2] * 2
    h, w = quant.shape[0], quant.shape[1]
    scanlines = bytearray()
    for y in range(h):
        scanlines.append(0)  # filter type 0
        scanlines += raw[y * row_bytes:(y + 1) * row_bytes]
    ihdr = struct.pack(">IIBBBBB", w, h, bit_depth, color_type, 0, 0, 0)
    data = (
        _PNG_SIG
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(bytes(scanlines), 9))
        + _png_chunk(b"IEND", b"")
    )
    Path(path).write_bytes(data)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(data: bytes, h: int, row_bytes: int, bpp: int) -> np.ndarray:
    out = np.zeros((h, row_bytes), dtype=np.uint8)
    pos = 0
    prev = np.zeros(row_bytes, dtype=np.uint8)
    for y in range(h):
        ftype = data[pos]
        row = np.frombuffer(data, dtype=np.uint8, count=row_bytes, offset=pos + 1).copy()
        pos += 1 + row_bytes
        if ftype == 0:
            pass
        elif ftype == 2:
            row += prev
        elif ftype == 1:
            for i in range(bpp, row_bytes):
                row[i] = (int(row[i]) + int(row[i - bpp])) & 0xFF
        elif ftype == 3:
            for i in range(row_bytes):
                left = int(row[i - bpp]) if i >= bpp else 0
                row[i] = (int(row[i]) + (left + int(prev[i])) // 2) & 0xFF
        elif ftype == 4:
            for i in range(row_bytes):
                left = int(row[i - bpp]) if i >= bpp else 0
                ul = int(prev[i - bpp]) if i >= bpp else 0
                row[i] = (int(row[i]) + _paeth(left, int(prev[i]), ul)) & 0xFF
        else:
            raise ValueError(f"unsupported PNG filter type {ftype}")
        out[y] = row
        prev = row
    return out


def read_png(path) -> np.ndarray:
    """Read a PNG file to a float32 array in [0, 1], shape (H, W) or (H, W, 3).

    RGBA alpha is dropped; 16-bit samples are scaled by 65535.
    """
    data = Path(path).read_bytes()
    if data[:8] != _PNG_SIG:
        raise ValueError(f"{path}: not a PNG file")
    pos = 8
    ihdr = None
    idat = bytearray()
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        tag = data[pos + 4:pos + 8]
        payload = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise ValueError(f"{path}: missing IHDR chunk")
    w, h, bit_depth, color_type, _comp, _filt, interlace = ihdr
    if interlace != 0:
        raise ValueError(f"{path}: interlaced PNG is not supported")
    if bit_depth not in (8, 16):
        raise ValueError(f"{path}: unsupported bit depth {bit_depth}")
    channels = {0: 1, 2: 3, 6: 4}.get(color_type)
    if channels is None:
        raise ValueError(f"{path}: unsupported color type {color_type}")
    sample_bytes = bit_depth // 8
    bpp = channels * sample_bytes
    row_bytes = w * bpp
    rows = _unfilter(zlib.decompress(bytes(idat)), h, row_bytes, bpp)
    if bit_depth == 8:
        img = rows.reshape(h, w, channels).astype(np.float32) / 255.0
    else:
        img = rows.reshape(h, row_bytes).view(">u2").reshape(h, w, channels)
        img = img.astype(np.float32) / 65535.0
    if channels == 4:
        img = img[:, :, :3]
    if channels == 1:
        img = img[:, :, 0]
    return img


# ---------------------------------------------------------------------------
# Radiance RGBE (.hdr)
# ---------------------------------------------------------------------------

def _float_to_rgbe(rgb: np.ndarray) -> np.ndarray:
    h, w, _ = rgb.shape
    rgbe = np.zeros((h, w, 4), dtype=np.uint8)
    brightest = rgb.max(axis=2)
    mask = brightest >= 1e-32
    mantissa, exponent = np.frexp(brightest)
    scale = np.zeros_like(brightest)
    scale[mask] = mantissa[mask] * 256.0 / brightest[mask]
    rgbe[:, :, :3] = np.clip(rgb * scale[:, :, None], 0, 255).astype(np.uint8)
    rgbe[:, :, 3] = np.where(mask, exponent + 128, 0).astype(np.uint8)
    rgbe[~mask] = 0
    return rgbe


def _rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    exponent = rgbe[:, :, 3].astype(np.int32)
    scale = np.ldexp(1.0, exponent - 136).astype(np.float32)  # 136 = 128 + 8
    scale[exponent == 0] = 0.0
    return rgbe[:, :, :3].astype(np.float32) * scale[:, :, None]


def write_hdr(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) non-negative float array as a flat Radiance file."""
    arr = np.asarray(rgb, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got {arr.shape}")
    h, w = arr.shape[:2]
    header = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n" + f"-Y {h} +X {w}\n".encode("ascii")
    Path(path).write_bytes(header + _float_to_rgbe(arr).tobytes())


def _read_rle_scanline(data: bytes, pos: int, width: int) -> tuple[np.ndarray, int]:
    line = np.zeros((width, 4), dtype=np.uint8)
    for comp in range(4):
        x = 0
        while x < width:
            count = data[pos]
            pos += 1
            if count > 128:  # run
                line[x:x + count - 128, comp] = data[pos]
                pos += 1
                x += count - 128
            else:  # literal
                line[x:x + count, comp] = np.frombuffer(data, np.uint8, count, pos)
                pos += count
                x += count
    return line, pos


def read_hdr(path) -> np.ndarray:
    """Read a Radiance RGBE file to a float32 (H, W, 3) linear array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"#?"):
        raise ValueError(f"{path}: not a Radiance file")
    pos = 0
    fmt_ok = False
    while True:
        end = data.index(b"\n", pos)
        line = data[pos:end]
        pos = end + 1
        if line.startswith(b"FORMAT=") and b"32-bit_rle_rgbe" in line:
            fmt_ok = True
        if line == b"":
            break
    if not fmt_ok:
        raise ValueError(f"{path}: unsupported FORMAT")
    end = data.index(b"\n", pos)
    res = data[pos:end].decode("ascii").split()
    pos = end + 1
    if len(res) != 4 or res[0] != "-Y" or res[2] != "+X":
        raise ValueError(f"{path}: unsupported resolution line {' '.join(res)}")
    h, w = int(res[1]), int(res[3])
    rgbe = np.zeros((h, w, 4), dtype=np.uint8)
    for y in range(h):
        if (
            w >= 8
            and w <= 0x7FFF
            and pos + 4 <= len(data)
            and data[pos] == 2
            and data[pos + 1] == 2
            and (data[pos + 2] << 8 | data[pos + 3]) == w
        ):
            rgbe[y], pos = _read_rle_scanline(data, pos + 4, w)
        else:
            flat = np.frombuffer(data, np.uint8, w * 4, pos).reshape(w, 4)
            if np.any((flat[:, 0] == 1) & (flat[:, 1] == 1) & (flat[:, 2] == 1)):
                raise ValueError(f"{path}: old-style RLE scanlines are not supported")
            rgbe[y] = flat
            pos += w * 4
    return _rgbe_to_float(rgbe)


# ---------------------------------------------------------------------------
# Raw float32 frames
# ---------------------------------------------------------------------------

def write_raw(path, image: np.ndarray) -> None:
    """Write an (H, W, C) float array in the LCAT raw format."""
    arr = np.ascontiguousarray(image, dtype="<f4")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected (H, W, C) array, got {arr.shape}")
    h, w, c = arr.shape
    header = RAW_MAGIC + struct.pack("<III", h, w, c)
    Path(path).write_bytes(header + arr.tobytes())


def read_raw(path) -> np.ndarray:
    """Read an LCAT raw file to a float32 (H, W, C) array."""
    data = Path(path).read_bytes()
    if data[:4] != RAW_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}, expected {RAW_MAGIC!r}")
    h, w, c = struct.unpack_from("<III", data, 4)
    expected = 16 + h * w * c * 4
    if len(data) != expected:
        raise ValueError(f"{path}: truncated file, expected {expected} bytes, got {len(data)}")
    return np.frombuffer(data, "<f4", h * w * c, 16).reshape(h, w, c).copy()


# ---------------------------------------------------------------------------
# Frame-level helpers
# ---------------------------------------------------------------------------

def _to_hwc(pixels: torch.Tensor) -> np.ndarray:
    return pixels.detach().cpu().numpy().transpose(1, 2, 0)


def _to_chw(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1), dtype=np.float32))


def save_hdr_frame(frame: LinearHdrFrame, path) -> None:
    path = Path(path)
    if path.suffix == ".hdr":
        write_hdr(path, _to_hwc(frame.pixels))
    elif path.suffix == ".raw":
        write_raw(path, _to_hwc(frame.pixels))
    else:
        raise ValueError(f"unsupported HDR extension {path.suffix!r} (use .hdr or .raw)")


def load_hdr_frame(path) -> LinearHdrFrame:
    path = Path(path)
    if path.suffix == ".hdr":
        arr = read_hdr(path)
    elif path.suffix == ".raw":
        arr = read_raw(path)
    else:
        raise ValueError(f"unsupported HDR extension {path.suffix!r} (use .hdr or .raw)")
    return LinearHdrFrame(pixels=_to_chw(arr))


def save_ldr_frame(frame: LdrFrame, path, bit_depth: int = 8) -> None:
    write_png(path, _to_hwc(frame.pixels), bit_depth=bit_depth)


def load_ldr_frame(path, exposure: float = 1.0) -> LdrFrame:
    arr = read_png(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return LdrFrame(pixels=_to_chw(arr), exposure=exposure)


def load_linear_frame(path, response: CameraResponse = CameraResponse()) -> LinearHdrFrame:
    """Load any supported frame file to the linear domain.

    PNG files are treated as gamma-encoded observations at unit exposure and
    decoded through ``response``; .hdr/.raw files are already linear.
    """
    path = Path(path)
    if path.suffix == ".png":
        ldr = load_ldr_frame(path)
        return LinearHdrFrame(pixels=ldr.pixels ** response.gamma)
    return load_hdr_frame(path)
